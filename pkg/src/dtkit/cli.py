"""Pipeline orchestration.

Each subcommand reads its inputs, writes artifacts into the output directory,
and records a meta file with content digests of everything it consumed and
produced. Downstream stages verify those digests before running, so a stale
or edited upstream artifact fails fast with a message naming the stage to
re-run. Nothing in an artifact depends on wall-clock time: identical inputs,
config, and seed reproduce identical bytes.

Exit codes: 0 success, 2 validation error, 3 stale or missing dependency.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import annotation, classify, corpus, indicators, sampling
from .econometrics import (
    FE_FIRM,
    FE_YEAR,
    EstimationError,
    PanelDataset,
    RegressionSpec,
    SampleFilter,
    channel_suite,
    describe,
    fit_2sls,
    fit_fe_ols,
    fit_quantile,
    fit_to_dict,
    lag,
    merge_indicators,
    per_technology_suite,
    render_regression_table,
)
from .instruments import (
    DEFAULT_RHO,
    ListingPanel,
    build_iv,
    load_firm_locations,
    load_roster,
)
from .lexicon import LexiconError, hit_from_record, hit_to_record, load_lexicon, match_sentence
from .serial import read_jsonl, sha256_file, stable_dumps, write_jsonl
from .service import AnnotationService, ServiceConfig

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_STALE = 3


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_VALIDATION):
        super().__init__(message)
        self.code = code


# ---------------------------------------------------------------------------
# Config and provenance
# ---------------------------------------------------------------------------


def load_config(path: str | None) -> dict:
    if not path:
        return {}
    p = Path(path)
    if not p.is_file():
        raise CliError(f"config file not found: {p}")
    try:
        cfg = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CliError(f"config is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise CliError("config must be a JSON object")
    return cfg


def setting(args, cfg: dict, name: str, default=None):
    """CLI flag beats config file beats default."""
    value = getattr(args, name, None)
    if value is not None:
        return value
    if name in cfg:
        return cfg[name]
    return default


def _meta_path(out: Path, stage: str) -> Path:
    return out / f"{stage}.meta.json"


def _portable(path: Path, out: Path) -> str:
    """Artifacts inside the out dir are recorded relative to it, so two runs
    into different directories still produce byte-identical meta files."""
    try:
        return str(Path(path).relative_to(out))
    except ValueError:
        return str(path)


def write_meta(out: Path, stage: str, inputs: dict[str, Path], outputs: dict[str, Path], params: dict) -> None:
    meta = {
        "stage": stage,
        "params": params,
        "inputs": {
            name: {"path": _portable(path, out), "sha256": sha256_file(path)}
            for name, path in sorted(inputs.items())
        },
        "outputs": {
            name: {"path": str(path.relative_to(out)), "sha256": sha256_file(path)}
            for name, path in sorted(outputs.items())
        },
    }
    _meta_path(out, stage).write_text(stable_dumps(meta) + "\n", encoding="utf-8")


def require_stage(out: Path, stage: str) -> dict:
    """Verify a prior stage's artifacts are present and unchanged; return its
    meta. Digest mismatches name the stage to re-run."""
    meta_file = _meta_path(out, stage)
    if not meta_file.is_file():
        raise CliError(f"missing `{stage}` artifacts in {out}; run `{stage}` first", EXIT_STALE)
    meta = json.loads(meta_file.read_text(encoding="utf-8"))
    for name, rec in meta.get("inputs", {}).items():
        path = Path(rec["path"])
        if not path.is_absolute():
            path = out / path
        if not path.is_file() or sha256_file(path) != rec["sha256"]:
            raise CliError(
                f"input {name} ({rec['path']}) changed since `{stage}` ran; re-run `{stage}`",
                EXIT_STALE,
            )
    for name, rec in meta.get("outputs", {}).items():
        path = out / rec["path"]
        if not path.is_file() or sha256_file(path) != rec["sha256"]:
            raise CliError(
                f"artifact {name} ({rec['path']}) is missing or was modified; re-run `{stage}`",
                EXIT_STALE,
            )
    return meta


def artifact_path(out: Path, meta: dict, name: str) -> Path:
    return out / meta["outputs"][name]["path"]


def _out_dir(args, cfg) -> Path:
    out = Path(setting(args, cfg, "out", "artifacts"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _read_sentences(path: Path) -> list[corpus.Sentence]:
    return [corpus.sentence_from_record(rec) for rec in read_jsonl(path)]


def _read_labels_csv(path: Path) -> list[tuple[str, str, str]]:
    """Labels CSV: sentence_id,text,label."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if set(reader.fieldnames or []) != {"sentence_id", "text", "label"}:
            raise CliError(f"{path}: expected header sentence_id,text,label")
        for row in reader:
            if row["label"] not in annotation.LABEL_CLASSES:
                raise CliError(f"{path}: unknown label {row['label']!r}")
            rows.append((row["sentence_id"], row["text"], row["label"]))
    if not rows:
        raise CliError(f"{path}: no labeled sentences")
    return rows


# ---------------------------------------------------------------------------
# Stages
# ---------------------------------------------------------------------------


def cmd_ingest(args) -> int:
    cfg = load_config(args.config)
    out = _out_dir(args, cfg)
    manifest = Path(setting(args, cfg, "manifest") or _fail("manifest path required"))
    try:
        records = corpus.ingest_manifest(manifest)
    except corpus.ManifestError as exc:
        raise CliError(str(exc)) from None
    filings_path = out / "filings.jsonl"
    write_jsonl(
        filings_path,
        (
            {
                "firm_id": r.firm_id,
                "year": r.year,
                "exchange": r.exchange,
                "naics": r.naics_code,
                "employees": r.employees,
                "text_path": str(r.text_path),
            }
            for r in records
        ),
    )
    inputs = {"manifest": manifest}
    inputs.update({f"filing:{r.firm_id}:{r.year}": r.text_path for r in records})
    write_meta(out, "ingest", inputs, {"filings": filings_path}, {"n_filings": len(records)})
    print(f"ingest: {len(records)} filings -> {filings_path}")
    return EXIT_OK


def _records_from_filings(path: Path) -> list[corpus.FilingRecord]:
    return [
        corpus.FilingRecord(
            rec["firm_id"],
            int(rec["year"]),
            rec["exchange"],
            rec["naics"],
            rec["employees"],
            Path(rec["text_path"]),
        )
        for rec in read_jsonl(path)
    ]


def cmd_segment(args) -> int:
    cfg = load_config(args.config)
    out = _out_dir(args, cfg)
    meta = require_stage(out, "ingest")
    filings_path = artifact_path(out, meta, "filings")
    records = _records_from_filings(filings_path)
    min_tokens = int(setting(args, cfg, "min_tokens", 5))
    sentences = corpus.segment_corpus(records, min_tokens=min_tokens)
    ids = [s.sentence_id for s in sentences]
    if len(set(ids)) != len(ids):
        raise CliError("sentence id collision; corpus digesting is broken")
    sentences_path = out / "sentences.jsonl"
    write_jsonl(sentences_path, (corpus.sentence_to_record(s) for s in sentences))
    inputs = {"filings": filings_path}
    inputs.update({f"filing:{r.firm_id}:{r.year}": r.text_path for r in records})
    write_meta(
        out,
        "segment",
        inputs,
        {"sentences": sentences_path},
        {"min_tokens": min_tokens, "n_sentences": len(sentences)},
    )
    print(f"segment: {len(sentences)} sentences -> {sentences_path}")
    return EXIT_OK


def cmd_match(args) -> int:
    cfg = load_config(args.config)
    out = _out_dir(args, cfg)
    meta = require_stage(out, "segment")
    sentences_path = artifact_path(out, meta, "sentences")
    lexicon_path = Path(setting(args, cfg, "lexicon") or _fail("lexicon path required"))
    try:
        lexicon = load_lexicon(lexicon_path)
    except LexiconError as exc:
        raise CliError(str(exc)) from None
    sentences = _read_sentences(sentences_path)
    hits_path = out / "hits.jsonl"
    n = 0
    with open(hits_path, "w", encoding="utf-8", newline="\n") as fh:
        for sentence in sentences:
            for hit in match_sentence(sentence, lexicon):
                fh.write(stable_dumps(hit_to_record(hit)) + "\n")
                n += 1
    write_meta(
        out,
        "match",
        {"sentences": sentences_path, "lexicon": lexicon_path},
        {"hits": hits_path},
        {"n_hits": n, "lexicon_size": len(lexicon)},
    )
    print(f"match: {n} keyword hits -> {hits_path}")
    return EXIT_OK


def cmd_sample(args) -> int:
    cfg = load_config(args.config)
    out = _out_dir(args, cfg)
    seg_meta = require_stage(out, "segment")
    match_meta = require_stage(out, "match")
    sentences = _read_sentences(artifact_path(out, seg_meta, "sentences"))
    hits = [hit_from_record(rec) for rec in read_jsonl(artifact_path(out, match_meta, "hits"))]
    seed = int(setting(args, cfg, "seed", 0))
    quota = int(setting(args, cfg, "per_year_quota", 25))
    pool = sampling.build_annotation_pool(sentences, hits, quota, seed)
    pool_path = out / "annotation_pool.jsonl"
    write_jsonl(pool_path, ({"sentence_id": sid} for sid in pool.members))
    write_meta(
        out,
        "sample",
        {
            "sentences": artifact_path(out, seg_meta, "sentences"),
            "hits": artifact_path(out, match_meta, "hits"),
        },
        {"annotation_pool": pool_path},
        {"seed": seed, "per_year_quota": quota, "pool_size": len(pool)},
    )
    print(f"sample: annotation pool of {len(pool)} -> {pool_path}")
    return EXIT_OK


def cmd_serve(args) -> int:
    cfg = load_config(args.config)
    out = _out_dir(args, cfg)
    seg_meta = require_stage(out, "segment")
    sample_meta = require_stage(out, "sample")
    sentences = _read_sentences(artifact_path(out, seg_meta, "sentences"))
    pool_ids = {rec["sentence_id"] for rec in read_jsonl(artifact_path(out, sample_meta, "annotation_pool"))}
    pool_sentences = [s for s in sentences if s.sentence_id in pool_ids]
    service = AnnotationService(
        pool_sentences,
        ServiceConfig(
            host=setting(args, cfg, "host", "127.0.0.1"),
            port=int(setting(args, cfg, "port", 8787)),
            log_path=Path(setting(args, cfg, "events", out / "events.jsonl")),
            token=setting(args, cfg, "token"),
            adjudicator_token=setting(args, cfg, "adjudicator_token"),
        ),
    )
    print(f"serving {len(pool_sentences)} sentences on {service.base_url} (ctrl-c to stop)")
    try:
        service.serve_forever()
    except KeyboardInterrupt:
        service.shutdown()
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    out = _out_dir(args, cfg)
    labels_path = Path(setting(args, cfg, "labels") or _fail("labels CSV required"))
    if not labels_path.is_file():
        raise CliError(f"labels file not found: {labels_path}")
    rows = _read_labels_csv(labels_path)
    seed = int(setting(args, cfg, "seed", 0))
    split = sampling.split_dataset([(sid, label) for sid, _, label in rows], seed=seed)
    splits_path = out / "splits.jsonl"
    write_jsonl(
        splits_path,
        ({"sentence_id": sid, "assignment": split.assignment[sid]} for sid, _, _ in rows),
    )
    train_rows = [
        (text, label) for sid, text, label in rows if split.assignment[sid] == sampling.SPLIT_TRAIN
    ]
    classes = tuple(sorted({label for _, _, label in rows}))
    try:
        model = classify.train_naive_bayes(train_rows, classes=classes)
    except classify.ClassifierError as exc:
        raise CliError(str(exc)) from None
    model_path = out / "model.json"
    model.save(model_path)
    write_meta(
        out,
        "train",
        {"labels": labels_path},
        {"model": model_path, "splits": splits_path},
        {"seed": seed, "n_train": len(train_rows), "classes": list(classes)},
    )
    print(f"train: naive bayes over {len(train_rows)} sentences -> {model_path}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = load_config(args.config)
    out = _out_dir(args, cfg)
    train_meta = require_stage(out, "train")
    labels_path = Path(train_meta["inputs"]["labels"]["path"])
    if not labels_path.is_absolute():
        labels_path = out / labels_path
    rows = _read_labels_csv(labels_path)
    split_lookup = {
        rec["sentence_id"]: rec["assignment"]
        for rec in read_jsonl(artifact_path(out, train_meta, "splits"))
    }
    which = setting(args, cfg, "split", sampling.SPLIT_TEST)
    if which not in sampling.SPLIT_ORDER:
        raise CliError(f"unknown split {which!r}")
    model = classify.NbModel.load(artifact_path(out, train_meta, "model"))
    subset = [(sid, text, label) for sid, text, label in rows if split_lookup.get(sid) == which]
    if not subset:
        raise CliError(f"split {which} is empty")
    sentences = [corpus.Sentence(sid, "", 0, "MDA", 0, text) for sid, text, _ in subset]
    predictions = classify.predict(model, sentences)
    gold = {sid: label for sid, _, label in subset}
    report = classify.evaluate(predictions, gold)
    eval_path = out / "eval.json"
    eval_path.write_text(stable_dumps(report.to_dict()) + "\n", encoding="utf-8")
    table_path = out / "eval_table.txt"
    table_path.write_text(report.render() + "\n", encoding="utf-8")
    write_meta(
        out,
        "evaluate",
        {
            "labels": labels_path,
            "model": artifact_path(out, train_meta, "model"),
            "splits": artifact_path(out, train_meta, "splits"),
        },
        {"eval": eval_path, "eval_table": table_path},
        {"split": which, "n": report.n},
    )
    print(report.render())
    print(f"evaluate: {which} metrics -> {eval_path}")
    return EXIT_OK


def _make_backend(args, cfg, out: Path):
    backend_kind = setting(args, cfg, "backend", "dictionary")
    inputs: dict[str, Path] = {}
    if backend_kind == "dictionary":
        lexicon_path = Path(setting(args, cfg, "lexicon") or _fail("lexicon path required"))
        inputs["lexicon"] = lexicon_path
        return classify.DictionaryBackend(load_lexicon(lexicon_path)), backend_kind, inputs
    if backend_kind == "nb":
        train_meta = require_stage(out, "train")
        model_path = artifact_path(out, train_meta, "model")
        inputs["model"] = model_path
        return classify.NbModel.load(model_path), backend_kind, inputs
    if backend_kind == "remote":
        endpoint = setting(args, cfg, "endpoint") or _fail("remote backend needs an endpoint")
        config = classify.RemoteBackendConfig(
            endpoint=endpoint,
            batch_size=int(setting(args, cfg, "batch_size", 32)),
            timeout=float(setting(args, cfg, "timeout", 30.0)),
            max_retries=int(setting(args, cfg, "max_retries", 3)),
            backoff_base=float(setting(args, cfg, "backoff_base", 0.5)),
        )
        return classify.RemoteBackend(config), backend_kind, inputs
    raise CliError(f"unknown backend {backend_kind!r} (dictionary, nb, remote)")


def cmd_predict(args) -> int:
    cfg = load_config(args.config)
    out = _out_dir(args, cfg)
    seg_meta = require_stage(out, "segment")
    sentences_path = artifact_path(out, seg_meta, "sentences")
    sentences = _read_sentences(sentences_path)
    backend, backend_kind, inputs = _make_backend(args, cfg, out)
    try:
        predictions = classify.predict(backend, sentences)
    except (classify.ClassifierError, classify.RemoteBackendError) as exc:
        raise CliError(str(exc)) from None
    predictions_path = out / "predictions.jsonl"
    write_jsonl(predictions_path, (classify.prediction_to_record(p) for p in predictions))
    inputs["sentences"] = sentences_path
    write_meta(
        out,
        "predict",
        inputs,
        {"predictions": predictions_path},
        {"backend": backend_kind, "n": len(predictions)},
    )
    print(f"predict: {len(predictions)} predictions ({backend_kind}) -> {predictions_path}")
    return EXIT_OK


def cmd_indicators(args) -> int:
    cfg = load_config(args.config)
    out = _out_dir(args, cfg)
    seg_meta = require_stage(out, "segment")
    pred_meta = require_stage(out, "predict")
    sentences = _read_sentences(artifact_path(out, seg_meta, "sentences"))
    predictions = [
        classify.prediction_from_record(rec)
        for rec in read_jsonl(artifact_path(out, pred_meta, "predictions"))
    ]
    mode = setting(args, cfg, "mode", indicators.MODE_CUMULATIVE)
    min_sentences = int(setting(args, cfg, "min_sentences", 1))
    try:
        rows = indicators.build_indicators(predictions, sentences, mode, min_sentences)
    except indicators.IndicatorError as exc:
        raise CliError(str(exc)) from None
    ind_path = out / "indicators.csv"
    indicators.write_indicators_csv(rows, ind_path)
    write_meta(
        out,
        "indicators",
        {
            "sentences": artifact_path(out, seg_meta, "sentences"),
            "predictions": artifact_path(out, pred_meta, "predictions"),
        },
        {"indicators": ind_path},
        {"mode": mode, "min_sentences": min_sentences, "n_rows": len(rows)},
    )
    print(f"indicators: {len(rows)} firm-year rows -> {ind_path}")
    return EXIT_OK


def _build_sample_filter(rcfg: dict) -> SampleFilter | None:
    if not any(k in rcfg for k in ("year_min", "year_max", "exclude_naics_prefixes")):
        return None
    return SampleFilter(
        year_min=rcfg.get("year_min"),
        year_max=rcfg.get("year_max"),
        exclude_naics_prefixes=tuple(rcfg.get("exclude_naics_prefixes", ())),
        naics_column=rcfg.get("naics_column", "naics"),
    )


def _add_iv_column(panel: PanelDataset, iv_cfg: dict) -> PanelDataset:
    locations = load_firm_locations(Path(iv_cfg["locations"]))
    roster = load_roster(Path(iv_cfg["roster"]))
    rho = float(iv_cfg.get("rho", DEFAULT_RHO))
    frame = panel.frame
    listing = ListingPanel(
        (f, int(y), locations[f].city_id)
        for f, y in zip(frame["firm_id"], frame["year"])
        if f in locations
    )
    values = []
    for f, y in zip(frame["firm_id"], frame["year"]):
        if f not in locations:
            values.append(np.nan)
            continue
        values.append(build_iv(locations[f], int(y), listing, roster, rho))
    return panel.with_column("iv", values, note=f"geographic instrument, rho={rho}")


def cmd_regress(args) -> int:
    cfg = load_config(args.config)
    out = _out_dir(args, cfg)
    ind_meta = require_stage(out, "indicators")
    panel_path = Path(setting(args, cfg, "panel") or _fail("panel CSV required"))
    if not panel_path.is_file():
        raise CliError(f"panel file not found: {panel_path}")
    rcfg = cfg.get("regress", {})
    panel = PanelDataset.from_csv(panel_path)
    ind_rows = indicators.read_indicators_csv(artifact_path(out, ind_meta, "indicators"))
    merged = merge_indicators(panel, ind_rows)
    sample_filter = _build_sample_filter(rcfg)
    controls = tuple(rcfg.get("controls", ()))
    winsor = {k: float(v) for k, v in rcfg.get("winsorize", {}).items()}
    trim = bool(rcfg.get("trim", False))
    cluster = FE_FIRM if rcfg.get("cluster", "FIRM") == "FIRM" else None

    results: dict[str, dict] = {}
    tables: list[str] = []
    try:
        baseline_fits = {}
        for dep in rcfg.get("dependents", ("roa",)):
            spec = RegressionSpec(
                dependent=dep,
                regressors=("dt", *controls),
                fixed_effects=frozenset({FE_FIRM, FE_YEAR}),
                cluster=cluster,
                winsorize=winsor,
                trim=trim,
                sample_filter=sample_filter,
            )
            baseline_fits[dep] = fit_fe_ols(spec, merged)
            if rcfg.get("lag_dependents"):
                lagged = merged.with_column(f"{dep}_lag1", lag(merged, dep, 1))
                spec_lag = RegressionSpec(
                    dependent=f"{dep}_lag1",
                    regressors=("dt", *controls),
                    fixed_effects=frozenset({FE_FIRM, FE_YEAR}),
                    cluster=cluster,
                    winsorize=winsor,
                    trim=trim,
                    sample_filter=sample_filter,
                )
                baseline_fits[f"{dep}_lag1"] = fit_fe_ols(spec_lag, lagged)
        results["baseline"] = {k: fit_to_dict(v) for k, v in baseline_fits.items()}
        tables.append(render_regression_table(baseline_fits, ["dt", *controls], title="Baseline"))

        if rcfg.get("iv"):
            iv_panel = _add_iv_column(merged, rcfg["iv"])
            iv_fits = {}
            for dep in rcfg["iv"].get("dependents", rcfg.get("dependents", ("roa",))):
                spec = RegressionSpec(
                    dependent=dep,
                    regressors=controls,
                    endogenous="dt",
                    instruments=("iv",),
                    fixed_effects=frozenset({FE_FIRM, FE_YEAR}),
                    cluster=cluster,
                    winsorize=winsor,
                    trim=trim,
                    sample_filter=sample_filter,
                )
                iv_fits[dep] = fit_2sls(spec, iv_panel)
            results["iv"] = {k: fit_to_dict(v) for k, v in iv_fits.items()}
            tables.append(render_regression_table(iv_fits, ["dt", *controls], title="Instrumented"))

        if rcfg.get("quantile"):
            qcfg = rcfg["quantile"]
            spec = RegressionSpec(
                dependent=qcfg.get("dependent", "roa"),
                regressors=("dt", *controls),
                fixed_effects=frozenset({FE_YEAR}),
                cluster=cluster,
                winsorize=winsor,
                trim=trim,
                sample_filter=sample_filter,
            )
            fits = fit_quantile(
                spec,
                merged,
                taus=tuple(qcfg.get("taus", (0.1, 0.25, 0.5, 0.75, 0.9))),
                n_boot=int(qcfg.get("n_boot", 200)),
                seed=int(setting(args, cfg, "seed", 0)),
            )
            results["quantile"] = {f"tau_{f.tau:g}": fit_to_dict(f) for f in fits}
            tables.append(
                render_regression_table(
                    {f"QR {f.tau:g}": f for f in fits}, ["dt", *controls], title="Quantile"
                )
            )

        if rcfg.get("per_technology"):
            dep = rcfg["per_technology"].get("dependent", "roa")
            tech_fits = per_technology_suite(
                merged, ind_rows, dependent=dep, controls=controls,
                cluster=cluster, sample_filter=sample_filter,
            )
            results["per_technology"] = {k: fit_to_dict(v) for k, v in tech_fits.items()}
            tables.append(
                render_regression_table(
                    {t.upper(): f for t, f in tech_fits.items()},
                    [f"uses_{t}" for t in tech_fits],
                    title=f"Per-technology ({dep})",
                )
            )

        if rcfg.get("channels"):
            report = channel_suite(
                merged, None if "dt" in merged.frame.columns else ind_rows,
                controls=controls, cluster=cluster, sample_filter=sample_filter,
            )
            results["channels"] = {k: fit_to_dict(v) for k, v in report.results.items()}
            tables.append(
                render_regression_table(dict(report.results), ["dt", *controls], title="Channels")
            )

        if rcfg.get("describe"):
            table = describe(merged, rcfg["describe"])
            results["describe"] = json.loads(table.to_json(orient="index"))
            tables.append("Descriptives\n" + table.to_string())
    except EstimationError as exc:
        raise CliError(str(exc)) from None

    regress_path = out / "regress.json"
    regress_path.write_text(stable_dumps(results) + "\n", encoding="utf-8")
    tables_path = out / "regress_tables.txt"
    tables_path.write_text("\n\n".join(tables) + "\n", encoding="utf-8")
    write_meta(
        out,
        "regress",
        {"panel": panel_path, "indicators": artifact_path(out, ind_meta, "indicators")},
        {"regress": regress_path, "regress_tables": tables_path},
        {"blocks": sorted(results)},
    )
    print(f"regress: {', '.join(sorted(results))} -> {regress_path}")
    return EXIT_OK


def cmd_report(args) -> int:
    cfg = load_config(args.config)
    out = _out_dir(args, cfg)
    ind_meta = require_stage(out, "indicators")
    ind_rows = indicators.read_indicators_csv(artifact_path(out, ind_meta, "indicators"))
    seed = setting(args, cfg, "seed", 0)

    sections: list[str] = [f"pipeline report (seed={seed})"]
    inputs = {"indicators": artifact_path(out, ind_meta, "indicators")}
    outputs: dict[str, Path] = {}

    trend = indicators.adoption_trend(ind_rows)
    trend_path = out / "trend.csv"
    trend.to_csv(trend_path, lineterminator="\n")
    outputs["trend"] = trend_path
    sections.append("Adoption trend (share of firms, cumulative)\n" + trend.to_string())

    ingest_meta_path = _meta_path(out, "ingest")
    if ingest_meta_path.is_file():
        ingest_meta = require_stage(out, "ingest")
        filings = _records_from_filings(artifact_path(out, ingest_meta, "filings"))
        naics_map = {r.firm_id: r.naics_code for r in filings}
        table = indicators.industry_table(ind_rows, naics_map)
        industry_path = out / "industry.csv"
        table.to_csv(industry_path, lineterminator="\n")
        outputs["industry"] = industry_path
        sections.append("Adoption by sector (ever adopted)\n" + table.to_string())
        inputs["filings"] = artifact_path(out, ingest_meta, "filings")

        patents_path = setting(args, cfg, "patents")
        if patents_path:
            patents = indicators.read_patents_csv(Path(patents_path))
            rates = indicators.patent_overlap(ind_rows, patents)
            lines = ["Patent overlap (flagged share of patent holders)"]
            for tech, rate in rates.items():
                lines.append(f"  {tech}: {'n/a' if rate is None else f'{rate:.2f}'}")
            sections.append("\n".join(lines))
            inputs["patents"] = Path(patents_path)

        employees = {r.firm_id: r.employees for r in filings}
        years = sorted({r.year for r in ind_rows})
        bins_cfg = cfg.get("size_bins", {})
        edges = bins_cfg.get("edges", [0, 500, 1000, 5000, 100000])
        bin_year = bins_cfg.get("year", years[-1])
        table, excluded = indicators.size_bins(ind_rows, employees, edges, bin_year)
        sections.append(
            f"AI adoption by employee-size bin ({bin_year}; {excluded} firms lacked counts)\n"
            + table.to_string()
        )

    eval_meta_path = _meta_path(out, "evaluate")
    if eval_meta_path.is_file():
        eval_meta = require_stage(out, "evaluate")
        eval_table = artifact_path(out, eval_meta, "eval_table").read_text(encoding="utf-8")
        sections.append("Classifier evaluation\n" + eval_table.rstrip())
        inputs["eval"] = artifact_path(out, eval_meta, "eval")

    regress_meta_path = _meta_path(out, "regress")
    if regress_meta_path.is_file():
        regress_meta = require_stage(out, "regress")
        tables_text = artifact_path(out, regress_meta, "regress_tables").read_text(encoding="utf-8")
        sections.append(tables_text.rstrip())
        inputs["regress"] = artifact_path(out, regress_meta, "regress")

    report_path = out / "report.txt"
    report_path.write_text("\n\n".join(sections) + "\n", encoding="utf-8")
    outputs["report"] = report_path
    write_meta(out, "report", inputs, outputs, {"seed": seed})
    print(f"report -> {report_path}")
    return EXIT_OK


def _fail(msg: str):
    raise CliError(msg)


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dtkit",
        description="Disclosure-text technology indicators and panel econometrics pipeline.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help_text, flags):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--out", help="artifact directory (default: artifacts)")
        for flag, kwargs in flags.items():
            p.add_argument(flag, **kwargs)
        p.set_defaults(fn=fn)
        return p

    add("ingest", cmd_ingest, "validate a filing manifest", {"--manifest": {}})
    add("segment", cmd_segment, "extract sections and split sentences",
        {"--min-tokens": {"dest": "min_tokens", "type": int}})
    add("match", cmd_match, "find lexicon keyword hits", {"--lexicon": {}})
    add("sample", cmd_sample, "build the year-balanced annotation pool",
        {"--seed": {"type": int}, "--per-year-quota": {"dest": "per_year_quota", "type": int}})
    add("serve", cmd_serve, "run the annotation HTTP service",
        {"--host": {}, "--port": {"type": int}, "--events": {},
         "--token": {}, "--adjudicator-token": {"dest": "adjudicator_token"}})
    add("train", cmd_train, "split labels and train the native classifier",
        {"--labels": {}, "--seed": {"type": int}})
    add("evaluate", cmd_evaluate, "score the trained model on a held-out split",
        {"--split": {}})
    add("predict", cmd_predict, "classify every sentence in the corpus",
        {"--backend": {}, "--lexicon": {}, "--endpoint": {},
         "--batch-size": {"dest": "batch_size", "type": int},
         "--timeout": {"type": float},
         "--max-retries": {"dest": "max_retries", "type": int},
         "--backoff-base": {"dest": "backoff_base", "type": float}})
    add("indicators", cmd_indicators, "aggregate predictions into firm-year dummies",
        {"--mode": {}, "--min-sentences": {"dest": "min_sentences", "type": int}})
    add("regress", cmd_regress, "run the configured regression suites",
        {"--panel": {}, "--seed": {"type": int}})
    add("report", cmd_report, "render trend, industry, evaluation, and regression tables",
        {"--patents": {}, "--seed": {"type": int}})
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
