import type { Dispute, LabelResult, NextCard, Progress, Session } from "./types.js";

/** HTTP failure carrying the status code so callers can branch on 401/409. */
export class ApiError extends Error {
  constructor(
    public readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** Thin typed client over the service endpoints. Holds no state beyond the
 * session: every view re-derives itself from server responses. */
export class ApiClient {
  constructor(
    private readonly session: Session,
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private headers(json: boolean): Record<string, string> {
    const h: Record<string, string> = {};
    if (json) h["Content-Type"] = "application/json";
    if (this.session.token) h["Authorization"] = `Bearer ${this.session.token}`;
    return h;
  }

  private url(path: string): string {
    return this.session.baseUrl.replace(/\/$/, "") + path;
  }

  private async parseError(resp: Response): Promise<ApiError> {
    let message = `${resp.status}`;
    try {
      const body = await resp.json();
      if (body && typeof body.error === "string") message = body.error;
    } catch {
      /* non-JSON error body; keep the status text */
    }
    return new ApiError(resp.status, message);
  }

  /** Next card for this annotator, or null when the pool is exhausted. */
  async next(): Promise<NextCard | null> {
    const resp = await this.fetchImpl(
      this.url(`/next?annotator=${encodeURIComponent(this.session.annotator)}`),
      { headers: this.headers(false) },
    );
    if (resp.status === 204) return null;
    if (!resp.ok) throw await this.parseError(resp);
    return (await resp.json()) as NextCard;
  }

  async label(sentenceId: string, label: string): Promise<LabelResult> {
    const resp = await this.fetchImpl(this.url("/label"), {
      method: "POST",
      headers: this.headers(true),
      body: JSON.stringify({
        sentence_id: sentenceId,
        annotator: this.session.annotator,
        label,
      }),
    });
    if (!resp.ok) throw await this.parseError(resp);
    return (await resp.json()) as LabelResult;
  }

  async disputes(): Promise<Dispute[]> {
    const resp = await this.fetchImpl(this.url("/disputes"), {
      headers: this.headers(false),
    });
    if (!resp.ok) throw await this.parseError(resp);
    return (await resp.json()) as Dispute[];
  }

  async adjudicate(sentenceId: string, resolution: string): Promise<{ status: string }> {
    const resp = await this.fetchImpl(this.url("/adjudicate"), {
      method: "POST",
      headers: this.headers(true),
      body: JSON.stringify({ sentence_id: sentenceId, resolution }),
    });
    if (!resp.ok) throw await this.parseError(resp);
    return (await resp.json()) as { status: string };
  }

  async progress(): Promise<Progress> {
    const resp = await this.fetchImpl(this.url("/progress"), {
      headers: this.headers(false),
    });
    if (!resp.ok) throw await this.parseError(resp);
    return (await resp.json()) as Progress;
  }
}
