"""Panel estimators and diagnostics.

Estimation follows the within tradition: firm and year intercepts are
absorbed by alternating demeaning iterated to convergence, slopes come from
OLS on the transformed data, and inference uses the cluster-robust sandwich
at the firm level. On top of that sit two-stage least squares with
weak-instrument diagnostics, check-loss quantile regression solved by
smoothed iteratively-reweighted least squares, and small helpers for
Cobb-Douglas productivity work.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import pandas as pd
from scipy import stats

from .indicators import TECHNOLOGIES, FirmYearIndicators, indicators_frame

log = logging.getLogger(__name__)

FE_FIRM = "FIRM"
FE_YEAR = "YEAR"

# Per-sweep change threshold for the within transformation, scaled by data
# magnitude; well under the 1e-10 contract so within estimates match explicit
# dummy regression at oracle tolerance.
DEMEAN_TOL = 1e-13
WEAK_F_THRESHOLD = 10.0


class EstimationError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Data containers
# ---------------------------------------------------------------------------


class PanelDataset:
    """Rectangular firm-year data: a frame keyed by (firm_id, year) plus
    optional per-column metadata (units, transforms applied)."""

    def __init__(self, frame: pd.DataFrame, meta: Mapping[str, dict] | None = None):
        if "firm_id" not in frame.columns or "year" not in frame.columns:
            raise EstimationError("panel needs firm_id and year columns")
        if frame.duplicated(subset=["firm_id", "year"]).any():
            dup = frame[frame.duplicated(subset=["firm_id", "year"])].iloc[0]
            raise EstimationError(f"duplicate (firm_id, year) = ({dup['firm_id']}, {dup['year']})")
        frame = frame.copy()
        frame["year"] = frame["year"].astype(int)
        self.frame = frame.reset_index(drop=True)
        self.meta = dict(meta or {})

    @classmethod
    def from_csv(cls, path: str | Path) -> "PanelDataset":
        return cls(pd.read_csv(path))

    def __len__(self) -> int:
        return len(self.frame)

    def columns(self) -> list[str]:
        return list(self.frame.columns)

    def with_column(self, name: str, values, note: str | None = None) -> "PanelDataset":
        frame = self.frame.copy()
        frame[name] = np.asarray(values, dtype=float)
        meta = dict(self.meta)
        if note:
            meta[name] = {"note": note}
        return PanelDataset(frame, meta)


@dataclass(frozen=True)
class SampleFilter:
    """Estimation-sample restrictions: a year window and sector exclusions
    matched by NAICS prefix."""

    year_min: int | None = None
    year_max: int | None = None
    exclude_naics_prefixes: tuple[str, ...] = ()
    naics_column: str = "naics"

    def apply(self, frame: pd.DataFrame) -> pd.DataFrame:
        out = frame
        if self.year_min is not None:
            out = out[out["year"] >= self.year_min]
        if self.year_max is not None:
            out = out[out["year"] <= self.year_max]
        if self.exclude_naics_prefixes:
            if self.naics_column not in out.columns:
                raise EstimationError(
                    f"sample filter needs column {self.naics_column!r} for sector exclusions"
                )
            sector = out[self.naics_column].astype(str)
            mask = ~sector.str.startswith(tuple(self.exclude_naics_prefixes))
            out = out[mask]
        return out


@dataclass(frozen=True)
class RegressionSpec:
    dependent: str
    regressors: tuple[str, ...]
    endogenous: str | None = None
    instruments: tuple[str, ...] = ()
    fixed_effects: frozenset = frozenset({FE_FIRM, FE_YEAR})
    cluster: str | None = FE_FIRM
    winsorize: Mapping[str, float] = field(default_factory=dict)
    trim: bool = False  # drop rows outside the winsorize quantiles instead of clipping
    sample_filter: SampleFilter | None = None

    def __post_init__(self):
        object.__setattr__(self, "regressors", tuple(self.regressors))
        object.__setattr__(self, "instruments", tuple(self.instruments))
        object.__setattr__(self, "fixed_effects", frozenset(self.fixed_effects))
        if self.endogenous and not self.instruments:
            raise EstimationError("an endogenous regressor needs at least one instrument")
        if not self.fixed_effects <= {FE_FIRM, FE_YEAR}:
            raise EstimationError(f"unknown fixed effects {self.fixed_effects}")
        if self.cluster not in (None, FE_FIRM):
            raise EstimationError("cluster dimension must be FIRM or None")


@dataclass(frozen=True)
class CoefStat:
    estimate: float
    se: float
    t: float
    p: float


@dataclass(frozen=True)
class FitResult:
    coefficients: Mapping[str, CoefStat]
    n_obs: int
    r2_within: float
    diagnostics: Mapping[str, float] = field(default_factory=dict)
    tau: float | None = None
    fixed_effects: frozenset = frozenset()
    cluster: str | None = None

    def coef(self, name: str) -> float:
        return self.coefficients[name].estimate

    def se(self, name: str) -> float:
        return self.coefficients[name].se


# ---------------------------------------------------------------------------
# Column transforms
# ---------------------------------------------------------------------------


def winsorize(values, p: float = 0.01, trim: bool = False) -> np.ndarray:
    """Clip to the [p, 1-p] empirical quantiles (linear interpolation).
    Missing values pass through untouched. With trim=True, values outside the
    quantiles become missing instead of clipped, so those rows drop out of
    any estimation sample downstream."""
    if not 0.0 < p < 0.5:
        raise EstimationError(f"winsorize share must be in (0, 0.5), got {p}")
    arr = np.asarray(values, dtype=float)
    finite = arr[np.isfinite(arr)]
    if finite.size < 2:
        raise EstimationError("winsorize needs at least 2 non-missing values")
    lo, hi = np.quantile(finite, [p, 1.0 - p])
    out = arr.copy()
    mask = np.isfinite(arr)
    if trim:
        out[mask & ((arr < lo) | (arr > hi))] = np.nan
    else:
        out[mask] = np.clip(arr[mask], lo, hi)
    return out


def lag(data: PanelDataset, column: str, k: int = 1) -> pd.Series:
    """Value of `column` at (firm, year - k); missing when that exact year is
    absent for the firm (gaps stay gaps, no interpolation)."""
    if k < 1:
        raise EstimationError("lag order must be >= 1")
    if column not in data.frame.columns:
        raise EstimationError(f"no column {column!r} to lag")
    frame = data.frame
    lookup = {
        (f, y): v
        for f, y, v in zip(frame["firm_id"], frame["year"], frame[column])
    }
    values = [
        lookup.get((f, y - k), np.nan) for f, y in zip(frame["firm_id"], frame["year"])
    ]
    return pd.Series(values, index=frame.index, name=f"{column}_lag{k}")


# ---------------------------------------------------------------------------
# Within transformation and OLS machinery
# ---------------------------------------------------------------------------


def _alternating_demean(
    matrix: np.ndarray, code_sets: Sequence[np.ndarray], tol: float = DEMEAN_TOL, max_sweeps: int = 10000
) -> np.ndarray:
    """Project out group means for every code set by alternating demeaning.

    Iterates until the largest per-sweep change falls below tol scaled by the
    data magnitude (the effective threshold is far below the 1e-10 contract
    on desk-scale data, which keeps the within estimates equal to explicit
    dummy regression at oracle tolerance)."""
    out = np.array(matrix, dtype=float, copy=True)
    if not code_sets or out.size == 0:
        return out
    threshold = tol * max(1.0, float(np.abs(out).max()))
    for _ in range(max_sweeps):
        max_change = 0.0
        for codes in code_sets:
            n_groups = int(codes.max()) + 1
            sums = np.zeros((n_groups, out.shape[1]))
            np.add.at(sums, codes, out)
            counts = np.bincount(codes, minlength=n_groups).astype(float)
            means = sums / counts[:, None]
            delta = means[codes]
            out -= delta
            change = float(np.abs(delta).max()) if delta.size else 0.0
            max_change = max(max_change, change)
        if max_change < threshold:
            return out
    raise EstimationError(f"demeaning did not converge below {threshold}")


def _prepare_sample(spec: RegressionSpec, data: PanelDataset, extra_columns: Sequence[str] = ()):
    """Filter, winsorize, and complete-case the estimation sample.

    Returns (frame, used_columns)."""
    frame = data.frame
    if spec.sample_filter is not None:
        frame = spec.sample_filter.apply(frame)
    used = [spec.dependent, *spec.regressors]
    if spec.endogenous:
        used.append(spec.endogenous)
    used.extend(spec.instruments)
    used.extend(c for c in extra_columns if c not in used)
    missing_cols = [c for c in used if c not in frame.columns]
    if missing_cols:
        raise EstimationError(f"missing column(s): {', '.join(missing_cols)}")
    frame = frame.dropna(subset=used).copy()
    if frame.empty:
        raise EstimationError("estimation sample is empty")
    for col, p in spec.winsorize.items():
        if col not in frame.columns:
            raise EstimationError(f"winsorize column {col!r} not in sample")
        frame[col] = winsorize(frame[col].to_numpy(), p, trim=spec.trim)
    if spec.trim and spec.winsorize:
        frame = frame.dropna(subset=used)
        if frame.empty:
            raise EstimationError("estimation sample is empty after trimming")
    return frame, used


def _fe_codes(spec: RegressionSpec, frame: pd.DataFrame) -> list[np.ndarray]:
    codes = []
    if FE_FIRM in spec.fixed_effects:
        codes.append(pd.factorize(frame["firm_id"])[0])
    if FE_YEAR in spec.fixed_effects:
        codes.append(pd.factorize(frame["year"])[0])
    return codes


def _check_full_rank(X: np.ndarray, names: Sequence[str], raw_scale: np.ndarray) -> None:
    """Reject columns degenerate after demeaning, naming the offender."""
    for j, name in enumerate(names):
        scale = max(raw_scale[j], 1.0)
        if np.linalg.norm(X[:, j]) < 1e-8 * scale * math.sqrt(len(X)):
            raise EstimationError(
                f"regressor {name!r} has no variation after the within transformation"
            )
    if X.shape[1] > 1:
        _, r = np.linalg.qr(X)
        diag = np.abs(np.diag(r))
        bad = diag < 1e-10 * max(diag.max(), 1.0)
        if bad.any():
            j = int(np.argmax(bad))
            raise EstimationError(f"regressor {names[j]!r} is collinear after demeaning")


def _cluster_codes(spec: RegressionSpec, frame: pd.DataFrame) -> np.ndarray:
    """Cluster assignment; with no cluster dimension every row is its own
    cluster, which collapses the sandwich to HC1."""
    if spec.cluster == FE_FIRM:
        return pd.factorize(frame["firm_id"])[0]
    return np.arange(len(frame))


def _sandwich(
    design: np.ndarray, scores_base: np.ndarray, resid: np.ndarray, clusters: np.ndarray
) -> tuple[np.ndarray, int]:
    """Cluster-robust covariance with the small-sample factor
    (G/(G-1)) * ((N-1)/(N-K)). `design` enters the bread; `scores_base`
    enters the meat (they differ for 2SLS)."""
    n, k = design.shape
    g = int(clusters.max()) + 1
    bread = np.linalg.inv(design.T @ design)
    score_rows = scores_base * resid[:, None]
    cluster_scores = np.zeros((g, k))
    np.add.at(cluster_scores, clusters, score_rows)
    meat = cluster_scores.T @ cluster_scores
    if g < 2:
        raise EstimationError("need at least 2 clusters for clustered inference")
    c = (g / (g - 1.0)) * ((n - 1.0) / (n - k))
    return c * bread @ meat @ bread, g


def _coef_stats(
    names: Sequence[str], beta: np.ndarray, vcov: np.ndarray, df: int
) -> dict[str, CoefStat]:
    out = {}
    for j, name in enumerate(names):
        se = math.sqrt(max(vcov[j, j], 0.0))
        t = beta[j] / se if se > 0 else math.inf
        p = 2.0 * stats.t.sf(abs(t), df) if se > 0 else 0.0
        out[name] = CoefStat(float(beta[j]), se, float(t), float(p))
    return out


def fit_fe_ols(spec: RegressionSpec, data: PanelDataset) -> FitResult:
    """Within OLS: absorb the requested fixed effects by alternating
    demeaning, regress, and report cluster-robust inference and the within
    R-squared."""
    if spec.endogenous:
        raise EstimationError("spec has an endogenous column; use fit_2sls")
    frame, _ = _prepare_sample(spec, data)
    y_raw = frame[spec.dependent].to_numpy(dtype=float)
    X_raw = frame[list(spec.regressors)].to_numpy(dtype=float)
    if X_raw.shape[1] == 0:
        raise EstimationError("no regressors")
    codes = _fe_codes(spec, frame)
    stacked = _alternating_demean(np.column_stack([y_raw, X_raw]), codes)
    y, X = stacked[:, 0], stacked[:, 1:]
    raw_scale = np.linalg.norm(X_raw - X_raw.mean(axis=0), axis=0) / max(math.sqrt(len(X_raw)), 1.0)
    _check_full_rank(X, spec.regressors, raw_scale)
    n, k = X.shape
    if n <= k:
        raise EstimationError(f"{n} observations cannot identify {k} coefficients")
    beta = np.linalg.solve(X.T @ X, X.T @ y)
    resid = y - X @ beta
    clusters = _cluster_codes(spec, frame)
    vcov, g = _sandwich(X, X, resid, clusters)
    df = g - 1 if spec.cluster else n - k
    sst = float(y @ y)
    r2 = 1.0 - float(resid @ resid) / sst if sst > 0 else 0.0
    return FitResult(
        coefficients=_coef_stats(spec.regressors, beta, vcov, df),
        n_obs=n,
        r2_within=r2,
        diagnostics={"n_clusters": g},
        fixed_effects=spec.fixed_effects,
        cluster=spec.cluster,
    )


# ---------------------------------------------------------------------------
# Two-stage least squares
# ---------------------------------------------------------------------------


def _partial_out(target: np.ndarray, X: np.ndarray) -> np.ndarray:
    if X.shape[1] == 0:
        return target
    coef, *_ = np.linalg.lstsq(X, target, rcond=None)
    return target - X @ coef


def fit_2sls(spec: RegressionSpec, data: PanelDataset) -> FitResult:
    """Two-stage least squares on within-transformed data.

    Second-stage residuals use the original endogenous column, not its
    fitted values, so the covariance is the textbook 2SLS sandwich.
    Diagnostics: the homoskedastic first-stage F on the excluded instruments,
    the Cragg-Donald Wald F, and single-endogenous Kleibergen-Paap rk Wald F
    computed with the cluster-robust first-stage covariance.

    The reported r2_within uses the OLS formula on the within-transformed
    data; for 2SLS it has no goodness-of-fit interpretation and can be
    negative.
    """
    if not spec.endogenous:
        raise EstimationError("fit_2sls needs spec.endogenous")
    frame, _ = _prepare_sample(spec, data)
    y_raw = frame[spec.dependent].to_numpy(dtype=float)
    x_raw = frame[spec.endogenous].to_numpy(dtype=float)
    Xe_raw = frame[list(spec.regressors)].to_numpy(dtype=float) if spec.regressors else np.empty((len(frame), 0))
    Z_raw = frame[list(spec.instruments)].to_numpy(dtype=float)
    codes = _fe_codes(spec, frame)
    stacked = _alternating_demean(np.column_stack([y_raw, x_raw, Xe_raw, Z_raw]), codes)
    y = stacked[:, 0]
    x = stacked[:, 1]
    Xe = stacked[:, 2 : 2 + Xe_raw.shape[1]]
    Z = stacked[:, 2 + Xe_raw.shape[1] :]
    n = len(y)
    n_exog = Xe.shape[1]
    L = Z.shape[1]

    if float(np.linalg.norm(x)) < 1e-10 * math.sqrt(n):
        raise EstimationError("endogenous column has no variation after demeaning")
    Z_tilde = _partial_out(Z, Xe)
    for j in range(L):
        if np.linalg.norm(Z_tilde[:, j]) < 1e-10 * max(np.linalg.norm(Z[:, j]), 1.0):
            raise EstimationError(
                f"instrument {spec.instruments[j]!r} is collinear with the included regressors"
            )

    W = np.column_stack([Z, Xe])  # excluded instruments first
    names = (spec.endogenous, *spec.regressors)
    R = np.column_stack([x, Xe])

    pi, *_ = np.linalg.lstsq(W, x, rcond=None)
    x_hat = W @ pi
    R_hat = np.column_stack([x_hat, Xe])
    k = R.shape[1]
    if n <= max(k, W.shape[1]):
        raise EstimationError("not enough observations for the 2SLS system")

    x_tilde = _partial_out(x, Xe)
    if float(x_tilde @ x_tilde) < 1e-20 * n:
        raise EstimationError("zero first-stage variation; the endogenous column is degenerate")
    pz, *_ = np.linalg.lstsq(Z_tilde, x_tilde, rcond=None)
    explained = float(x_tilde @ (Z_tilde @ pz))
    rss_u = float(x_tilde @ x_tilde) - explained
    df_fs = n - W.shape[1]

    try:
        beta = np.linalg.solve(R_hat.T @ R_hat, R_hat.T @ y)
    except np.linalg.LinAlgError:
        raise EstimationError("second-stage design is singular") from None
    resid = y - R @ beta
    clusters = _cluster_codes(spec, frame)
    vcov, g = _sandwich(R_hat, R_hat, resid, clusters)
    df = g - 1 if spec.cluster else n - k

    # First-stage partial F (homoskedastic Wald form) on excluded instruments.
    if rss_u <= 1e-12 * max(float(x_tilde @ x_tilde), 1e-30):
        first_stage_f = math.inf
        cragg_donald = math.inf
    else:
        first_stage_f = (explained / L) / (rss_u / df_fs)
        # Cragg-Donald: min eigenvalue of the first-stage Wald matrix; scalar
        # here since only one endogenous column is supported.
        sigma_vv = rss_u / df_fs
        cragg_donald = (explained / L) / sigma_vv

    kp_f = _kleibergen_paap_f(x, W, L, clusters, bool(spec.cluster))

    sst = float(y @ y)
    r2 = 1.0 - float(resid @ resid) / sst if sst > 0 else 0.0
    diagnostics = {
        "n_clusters": g,
        "first_stage_F": float(first_stage_f),
        "cragg_donald_F": float(cragg_donald),
        "kleibergen_paap_rk_F": float(kp_f),
        "weak_instruments": bool(first_stage_f < WEAK_F_THRESHOLD),
    }
    return FitResult(
        coefficients=_coef_stats(names, beta, vcov, df),
        n_obs=n,
        r2_within=r2,
        diagnostics=diagnostics,
        fixed_effects=spec.fixed_effects,
        cluster=spec.cluster,
    )


def _kleibergen_paap_f(
    x: np.ndarray, W: np.ndarray, n_excluded: int, clusters: np.ndarray, clustered: bool
) -> float:
    """Robust Wald F on the excluded instruments' first-stage coefficients
    (the Kleibergen-Paap rk statistic for a single endogenous regressor).
    Excluded instruments occupy the leading columns of W."""
    n, kw = W.shape
    pi, *_ = np.linalg.lstsq(W, x, rcond=None)
    resid = x - W @ pi
    bread = np.linalg.inv(W.T @ W)
    if clustered:
        g = int(clusters.max()) + 1
        scores = np.zeros((g, kw))
        np.add.at(scores, clusters, W * resid[:, None])
        meat = scores.T @ scores
        c = (g / (g - 1.0)) * ((n - 1.0) / (n - kw))
    else:
        score_rows = W * resid[:, None]
        meat = score_rows.T @ score_rows
        c = n / (n - kw)
    vcov = c * bread @ meat @ bread
    pz = pi[:n_excluded]
    vzz = vcov[:n_excluded, :n_excluded]
    try:
        wald = float(pz @ np.linalg.solve(vzz, pz))
    except np.linalg.LinAlgError:
        return math.inf
    return wald / n_excluded


# ---------------------------------------------------------------------------
# Quantile regression
# ---------------------------------------------------------------------------

DEFAULT_TAUS = (0.10, 0.25, 0.50, 0.75, 0.90)


def check_loss(resid: np.ndarray, tau: float) -> float:
    """Sum of the asymmetric check loss u * (tau - 1{u < 0})."""
    return float(np.sum(resid * (tau - (resid < 0))))


def _wls_solve(X: np.ndarray, y: np.ndarray, w: np.ndarray) -> np.ndarray:
    sw = np.sqrt(w)
    beta, *_ = np.linalg.lstsq(X * sw[:, None], y * sw, rcond=None)
    return beta


def _smoothed_loss(resid: np.ndarray, tau: float, eps: float) -> float:
    """Smooth surrogate of the check loss: (tau - 1/2) u + sqrt(u^2 + eps^2)/2,
    which tends to the check loss from above as eps -> 0."""
    return float(np.sum((tau - 0.5) * resid + 0.5 * np.sqrt(resid**2 + eps**2)))


def _quantile_solve(
    X: np.ndarray, y: np.ndarray, tau: float, tol: float = 1e-9, max_total: int = 20000
) -> np.ndarray:
    """Minimize the check loss by iteratively-reweighted least squares on a
    smoothed surrogate, tightening the smoothing parameter until the check
    objective stops moving, then polish by refitting through interpolation
    candidates near the solution (an optimal quantile fit interpolates as
    many points as it has parameters).

    Each reweighted solve is a majorize-minimize step on the surrogate, so
    the inner loop descends monotonically and cannot cycle.
    """
    if not 0.0 < tau < 1.0:
        raise EstimationError(f"tau must be inside (0, 1), got {tau}")
    n, p = X.shape
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ beta
    eps = max(float(np.median(np.abs(resid))) if n else 1.0, 1e-3)
    obj = check_loss(resid, tau)
    iterations = 0
    converged = False
    while True:
        level_tol = max(tol * 0.1, eps * 1e-6)
        surrogate_prev = math.inf
        while iterations < max_total:
            s = np.sqrt(resid**2 + eps**2)
            beta = _wls_solve(X, y + (tau - 0.5) * 2.0 * s, 1.0 / s)
            resid = y - X @ beta
            iterations += 1
            surrogate = _smoothed_loss(resid, tau, eps)
            if abs(surrogate_prev - surrogate) <= level_tol:
                break
            surrogate_prev = surrogate
        obj_new = check_loss(resid, tau)
        if eps <= 1e-10 and abs(obj - obj_new) <= tol:
            obj = obj_new
            converged = True
            break
        obj = obj_new
        eps *= 0.1
        if eps < 1e-14 or iterations >= max_total:
            break
    if not converged:
        raise EstimationError(
            f"quantile fit did not converge after {iterations} iterations "
            f"(objective {obj:.6g})"
        )

    # Polish: an optimal fit interpolates p sample points, so try the
    # interpolation sets built from the smallest residuals and take the best
    # vertex whenever it is at least as good as the IRLS point (ties go to
    # the vertex, which sits exactly on the data).
    if p <= 6 and n > p:
        order = np.argsort(np.abs(resid))
        candidates = order[: 2 * p]
        best_vertex = None
        best_obj = math.inf
        for subset in itertools.combinations(candidates, p):
            Xs = X[list(subset)]
            try:
                b = np.linalg.solve(Xs, y[list(subset)])
            except np.linalg.LinAlgError:
                continue
            o = check_loss(y - X @ b, tau)
            if o < best_obj:
                best_vertex, best_obj = b, o
        if best_vertex is not None and best_obj <= obj + 1e-12 * max(1.0, abs(obj)):
            beta = best_vertex
    return beta


def _quantile_design(spec: RegressionSpec, frame: pd.DataFrame) -> tuple[np.ndarray, list[str]]:
    columns = [np.ones(len(frame))]
    names = ["const"]
    for reg in spec.regressors:
        columns.append(frame[reg].to_numpy(dtype=float))
        names.append(reg)
    if FE_YEAR in spec.fixed_effects:
        years = sorted(frame["year"].unique())
        for year in years[1:]:
            columns.append((frame["year"] == year).to_numpy(dtype=float))
            names.append(f"year_{year}")
    if FE_FIRM in spec.fixed_effects:
        firms = sorted(frame["firm_id"].unique())
        for firm in firms[1:]:
            columns.append((frame["firm_id"] == firm).to_numpy(dtype=float))
            names.append(f"firm_{firm}")
    return np.column_stack(columns), names


def fit_quantile(
    spec: RegressionSpec,
    data: PanelDataset,
    taus: Sequence[float] = DEFAULT_TAUS,
    n_boot: int = 200,
    seed: int = 0,
) -> list[FitResult]:
    """Conditional-quantile fits at each tau.

    Year dummies enter the design when YEAR is in the fixed effects; firm
    dummies are opt-in (quantile fits with per-firm intercepts are fragile in
    short panels, so the default spec should request YEAR only). Standard
    errors come from a seeded nonparametric cluster bootstrap; n_boot=0 skips
    inference and reports point estimates alone.
    """
    if spec.endogenous:
        raise EstimationError("quantile fits do not support endogenous columns")
    frame, _ = _prepare_sample(spec, data)
    X, names = _quantile_design(spec, frame)
    y = frame[spec.dependent].to_numpy(dtype=float)
    if np.linalg.matrix_rank(X) < X.shape[1]:
        raise EstimationError("quantile design matrix is rank deficient")
    clusters = _cluster_codes(spec, frame)
    g = int(clusters.max()) + 1
    results = []
    for tau in taus:
        beta = _quantile_solve(X, y, tau)
        resid = y - X @ beta
        obj = check_loss(resid, tau)
        if n_boot > 0:
            draws = _quantile_bootstrap(X, y, tau, clusters, g, n_boot, seed)
            ses = draws.std(axis=0, ddof=1)
        else:
            ses = np.full(X.shape[1], np.nan)
        coefficients = {}
        for j, name in enumerate(names):
            se = float(ses[j])
            if n_boot > 0 and se > 0:
                t = float(beta[j] / se)
                p = float(2.0 * stats.norm.sf(abs(t)))
            else:
                t, p = math.nan, math.nan
            coefficients[name] = CoefStat(float(beta[j]), se, t, p)
        total = check_loss(y - np.quantile(y, tau), tau)
        pseudo_r2 = 1.0 - obj / total if total > 0 else 0.0
        results.append(
            FitResult(
                coefficients=coefficients,
                n_obs=len(y),
                r2_within=pseudo_r2,
                diagnostics={"objective": obj, "n_boot": n_boot, "n_clusters": g},
                tau=tau,
                fixed_effects=spec.fixed_effects,
                cluster=spec.cluster,
            )
        )
    return results


def _quantile_bootstrap(
    X: np.ndarray,
    y: np.ndarray,
    tau: float,
    clusters: np.ndarray,
    g: int,
    n_boot: int,
    seed: int,
) -> np.ndarray:
    """Cluster bootstrap draws with per-replication seed substreams, so the
    result is identical regardless of execution order or parallelism."""
    members = [np.flatnonzero(clusters == j) for j in range(g)]
    draws = np.empty((n_boot, X.shape[1]))
    for rep in range(n_boot):
        rng = np.random.default_rng([seed, rep])
        picked = rng.integers(0, g, size=g)
        rows = np.concatenate([members[j] for j in picked])
        try:
            draws[rep] = _quantile_solve(X[rows], y[rows], tau)
        except (EstimationError, np.linalg.LinAlgError):
            draws[rep] = np.nan
    return draws[~np.isnan(draws).any(axis=1)]


# ---------------------------------------------------------------------------
# Production function helpers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AlphaEstimate:
    alpha: float
    flagged: bool
    fit: FitResult


def estimate_alpha(
    data: PanelDataset,
    log_y: str = "log_y",
    log_k: str = "log_k",
    log_l: str = "log_l",
    cluster: str | None = FE_FIRM,
) -> AlphaEstimate:
    """Capital elasticity under constant returns: regress log(Y/L) on
    log(K/L) with firm and year effects. Estimates outside (0, 1) are
    flagged, not silently accepted."""
    for col in (log_y, log_k, log_l):
        if col not in data.frame.columns:
            raise EstimationError(f"missing column {col!r}")
    frame = data.frame.copy()
    frame["_lyl"] = frame[log_y] - frame[log_l]
    frame["_lkl"] = frame[log_k] - frame[log_l]
    spec = RegressionSpec(
        dependent="_lyl",
        regressors=("_lkl",),
        fixed_effects=frozenset({FE_FIRM, FE_YEAR}),
        cluster=cluster,
    )
    fit = fit_fe_ols(spec, PanelDataset(frame))
    alpha = fit.coef("_lkl")
    flagged = not 0.0 < alpha < 1.0
    if flagged:
        log.warning("capital elasticity %.4f outside (0, 1); flagged", alpha)
    return AlphaEstimate(alpha, flagged, fit)


@dataclass(frozen=True)
class TfpResult:
    values: np.ndarray  # NaN where a row was dropped
    n_dropped: int


def compute_tfp(Y, K, L, alpha: float) -> TfpResult:
    """TFP = Y / (K^alpha * L^(1-alpha)); rows with non-positive inputs are
    dropped (NaN) and counted."""
    if not 0.0 < alpha < 1.0:
        raise EstimationError(f"alpha must be inside (0, 1), got {alpha}")
    Y = np.asarray(Y, dtype=float)
    K = np.asarray(K, dtype=float)
    L = np.asarray(L, dtype=float)
    if not (Y.shape == K.shape == L.shape):
        raise EstimationError("Y, K, L must have identical shapes")
    valid = (
        np.isfinite(Y) & np.isfinite(K) & np.isfinite(L) & (Y > 0) & (K > 0) & (L > 0)
    )
    out = np.full(Y.shape, np.nan)
    out[valid] = Y[valid] / (K[valid] ** alpha * L[valid] ** (1.0 - alpha))
    n_dropped = int((~valid).sum())
    if n_dropped:
        log.warning("compute_tfp dropped %d row(s) with non-positive inputs", n_dropped)
    return TfpResult(out, n_dropped)


# ---------------------------------------------------------------------------
# Suites and summaries
# ---------------------------------------------------------------------------


def describe(data: PanelDataset, columns: Sequence[str]) -> pd.DataFrame:
    """Mean, std (ddof=1), max, min, and non-missing count per column."""
    missing = [c for c in columns if c not in data.frame.columns]
    if missing:
        raise EstimationError(f"missing column(s): {', '.join(missing)}")
    rows = []
    for col in columns:
        series = pd.to_numeric(data.frame[col], errors="coerce").dropna()
        rows.append(
            {
                "variable": col,
                "mean": series.mean(),
                "std": series.std(ddof=1) if len(series) > 1 else 0.0,
                "max": series.max(),
                "min": series.min(),
                "n": int(len(series)),
            }
        )
    return pd.DataFrame(rows).set_index("variable")


def merge_indicators(
    data: PanelDataset, indicators: Sequence[FirmYearIndicators]
) -> PanelDataset:
    """Left-join the indicator flags and dt dummy onto the panel."""
    ind = indicators_frame(indicators)
    merged = data.frame.merge(ind, on=["firm_id", "year"], how="left")
    return PanelDataset(merged, data.meta)


@dataclass(frozen=True)
class ChannelReport:
    results: Mapping[str, FitResult]
    alpha: float | None = None

    def dependents(self) -> list[str]:
        return list(self.results)


CHANNEL_DEPENDENTS = ("log_tfp_sales", "log_tfp_eva", "log_income", "log_cost", "cost_income")


def channel_suite(
    data: PanelDataset,
    indicators: Sequence[FirmYearIndicators] | None = None,
    controls: Sequence[str] = (),
    cluster: str | None = FE_FIRM,
    sample_filter: SampleFilter | None = None,
) -> ChannelReport:
    """Mechanism regressions: productivity, income, cost, and cost intensity
    against the dt dummy with firm and year effects.

    Needs columns income and cost (positive where used) and a prepared
    tfp_sales column; tfp_eva is optional and adds a column when present.
    """
    panel = merge_indicators(data, indicators) if indicators is not None else data
    frame = panel.frame.copy()
    for col in ("income", "cost", "tfp_sales"):
        if col not in frame.columns:
            raise EstimationError(f"channel suite needs column {col!r}")
    if "dt" not in frame.columns:
        raise EstimationError("channel suite needs a dt column or indicators to merge")
    dt = frame["dt"].dropna()
    if dt.nunique() < 2:
        raise EstimationError("dt has no variation; cannot run the channel suite")

    def safe_log(series):
        vals = series.to_numpy(dtype=float)
        return np.where(vals > 0, np.log(np.where(vals > 0, vals, 1.0)), np.nan)

    frame["log_income"] = safe_log(frame["income"])
    frame["log_cost"] = safe_log(frame["cost"])
    frame["cost_income"] = frame["cost"] / frame["income"]
    frame["log_tfp_sales"] = safe_log(frame["tfp_sales"])
    if "tfp_eva" in frame.columns:
        frame["log_tfp_eva"] = safe_log(frame["tfp_eva"])
    panel = PanelDataset(frame)

    results = {}
    for dep in CHANNEL_DEPENDENTS:
        if dep not in frame.columns:
            continue
        spec = RegressionSpec(
            dependent=dep,
            regressors=("dt", *controls),
            fixed_effects=frozenset({FE_FIRM, FE_YEAR}),
            cluster=cluster,
            sample_filter=sample_filter,
        )
        results[dep] = fit_fe_ols(spec, panel)
    return ChannelReport(results)


def per_technology_suite(
    data: PanelDataset,
    indicators: Sequence[FirmYearIndicators],
    dependent: str,
    controls: Sequence[str] = (),
    cluster: str | None = FE_FIRM,
    sample_filter: SampleFilter | None = None,
) -> dict[str, FitResult]:
    """One regression per technology with treatment coding: rows using the
    technology are treated, rows of firm-years using no technology at all are
    controls, and rows using only other technologies drop out."""
    panel = merge_indicators(data, indicators)
    results: dict[str, FitResult] = {}
    for tech in TECHNOLOGIES:
        frame = panel.frame
        in_sample = (frame[tech] == 1) | (frame["dt"] == 0)
        sub = frame[in_sample].copy()
        treated = int((sub[tech] == 1).sum())
        control = int((sub[tech] == 0).sum())
        if treated == 0 or control == 0:
            raise EstimationError(
                f"technology {tech!r} has an empty {'treatment' if treated == 0 else 'control'} group"
            )
        name = f"uses_{tech}"
        sub[name] = sub[tech]
        spec = RegressionSpec(
            dependent=dependent,
            regressors=(name, *controls),
            fixed_effects=frozenset({FE_FIRM, FE_YEAR}),
            cluster=cluster,
            sample_filter=sample_filter,
        )
        results[tech] = fit_fe_ols(spec, PanelDataset(sub))
    return results


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------


def significance_stars(p: float) -> str:
    if p < 0.01:
        return "***"
    if p < 0.05:
        return "**"
    if p < 0.10:
        return "*"
    return ""


def format_coef(stat: CoefStat) -> str:
    return f"{stat.estimate:.4f}{significance_stars(stat.p)} ({stat.se:.4f})"


def render_regression_table(
    results: Mapping[str, FitResult], coefficient_rows: Sequence[str], title: str = ""
) -> str:
    """Text table with one column per fit: coefficient rows as
    'estimate*** (se)', then FE markers, observations, and R-squared."""
    col_labels = list(results)
    width = max([len(c) for c in coefficient_rows + ["Observation"]] + [12]) + 2
    cell = max(max((len(c) for c in col_labels), default=12), 20) + 2
    lines = []
    if title:
        lines.append(title)
    lines.append("".ljust(width) + "".join(label.ljust(cell) for label in col_labels))
    for row in coefficient_rows:
        cells = []
        for label in col_labels:
            fit = results[label]
            cells.append(format_coef(fit.coefficients[row]) if row in fit.coefficients else "")
        lines.append(row.ljust(width) + "".join(c.ljust(cell) for c in cells))
    any_fit = next(iter(results.values()))
    fe_firm = "YES" if FE_FIRM in any_fit.fixed_effects else "NO"
    fe_year = "YES" if FE_YEAR in any_fit.fixed_effects else "NO"
    lines.append("Annual FE".ljust(width) + "".join(fe_year.ljust(cell) for _ in col_labels))
    lines.append("Firm FE".ljust(width) + "".join(fe_firm.ljust(cell) for _ in col_labels))
    lines.append(
        "Observation".ljust(width)
        + "".join(str(results[label].n_obs).ljust(cell) for label in col_labels)
    )
    lines.append(
        "R2".ljust(width)
        + "".join(f"{results[label].r2_within:.4f}".ljust(cell) for label in col_labels)
    )
    lines.append("Note: * p<0.10 ** p<0.05 *** p<0.01; clustered standard errors in parentheses.")
    return "\n".join(lines)


def fit_to_dict(fit: FitResult) -> dict:
    return {
        "coefficients": {
            name: {"estimate": s.estimate, "se": s.se, "t": s.t, "p": s.p}
            for name, s in fit.coefficients.items()
        },
        "n_obs": fit.n_obs,
        "r2_within": fit.r2_within,
        "diagnostics": dict(fit.diagnostics),
        "tau": fit.tau,
        "fixed_effects": sorted(fit.fixed_effects),
        "cluster": fit.cluster,
    }
