import { ApiError } from "./api.js";
import type { NextCard, Progress } from "./types.js";

/** Labeling-view state machine. The server is the only source of truth; this
 * object just sequences requests and guards against double submission. */

export type LoopState =
  | { kind: "loading" }
  | { kind: "card"; card: NextCard }
  | { kind: "complete" }
  | { kind: "failed"; message: string };

export interface LoopApi {
  next(): Promise<NextCard | null>;
  label(sentenceId: string, label: string): Promise<unknown>;
}

export class CardLoop {
  state: LoopState = { kind: "loading" };
  toast: string | null = null;
  private inFlight = false;
  private submitted = new Set<string>();
  private listeners: Array<() => void> = [];

  constructor(private readonly api: LoopApi) {}

  onChange(listener: () => void): void {
    this.listeners.push(listener);
  }

  private emit(): void {
    for (const fn of this.listeners) fn();
  }

  async start(): Promise<void> {
    this.state = { kind: "loading" };
    this.emit();
    await this.advance();
  }

  private async advance(): Promise<void> {
    try {
      const card = await this.api.next();
      this.state = card === null ? { kind: "complete" } : { kind: "card", card };
    } catch (err) {
      this.state = { kind: "failed", message: describe(err) };
    }
    this.inFlight = false;
    this.emit();
  }

  /** Submit a label for the current card, then fetch the next one.
   *
   * Dedupe: a sentence id is submitted at most once per page session, and a
   * second keypress while a request is in flight is ignored. A 409 from the
   * server (already labeled, task settled) is surfaced as a toast and the
   * loop advances; a network failure keeps the card and shows a retry
   * banner. */
  async submit(label: string): Promise<void> {
    if (this.state.kind !== "card" || this.inFlight) return;
    const card = this.state.card;
    if (this.submitted.has(card.sentence_id)) {
      await this.advance();
      return;
    }
    this.inFlight = true;
    this.emit();
    try {
      await this.api.label(card.sentence_id, label);
      this.submitted.add(card.sentence_id);
      this.toast = null;
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        // someone settled this sentence first; not an error for the annotator
        this.submitted.add(card.sentence_id);
        this.toast = `Skipped: ${err.message}`;
      } else {
        this.inFlight = false;
        this.state = { kind: "failed", message: describe(err) };
        this.emit();
        return;
      }
    }
    await this.advance();
  }

  /** Retry after a network failure; safe because the server rejects genuine
   * duplicates with 409, which the loop treats as already-done. */
  async retry(): Promise<void> {
    if (this.state.kind !== "failed") return;
    await this.start();
  }

  clearToast(): void {
    this.toast = null;
  }
}

function describe(err: unknown): string {
  if (err instanceof ApiError) return `${err.status}: ${err.message}`;
  if (err instanceof Error) return err.message;
  return String(err);
}

/** Dashboard rows, in display order, straight from the progress body. */
export function progressRows(p: Progress): Array<[string, string]> {
  const fmt = (v: number | null) => (v === null ? "n/a" : v.toFixed(3));
  return [
    ["Total", String(p.total)],
    ["Unlabeled", String(p.unlabeled)],
    ["Single", String(p.single)],
    ["Agreed", String(p.agreed)],
    ["Disputed", String(p.disputed)],
    ["Adjudicated", String(p.adjudicated)],
    ["Excluded", String(p.excluded)],
    ["Raw agreement", fmt(p.raw_agreement)],
    ["Cohen's kappa", fmt(p.kappa)],
  ];
}

/** Counts must always partition the pool; used as a render-time sanity check. */
export function progressConsistent(p: Progress): boolean {
  return (
    p.unlabeled + p.single + p.agreed + p.disputed + p.adjudicated + p.excluded === p.total
  );
}
