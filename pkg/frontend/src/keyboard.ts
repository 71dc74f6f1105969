import { HARD_SKIP, LABEL_CLASSES, LABEL_DISPLAY } from "./types.js";

/** Keyboard-first labeling: digits 1-8 are the substantive classes, 9 is the
 * hard/skip mark. */

export interface KeyBinding {
  key: string;
  label: string;
  display: string;
}

export const KEY_BINDINGS: KeyBinding[] = [
  ...LABEL_CLASSES.map((label, i) => ({
    key: String(i + 1),
    label,
    display: LABEL_DISPLAY[label],
  })),
  { key: "9", label: HARD_SKIP, display: LABEL_DISPLAY[HARD_SKIP] },
];

const BY_KEY = new Map(KEY_BINDINGS.map((b) => [b.key, b.label]));

export function labelForKey(key: string): string | null {
  return BY_KEY.get(key) ?? null;
}

/** Attach the digit bindings to a document; returns a detach function. */
export function bindKeys(
  target: { addEventListener: Function; removeEventListener: Function },
  onLabel: (label: string) => void,
): () => void {
  const handler = (event: KeyboardEvent) => {
    const el = event.target as HTMLElement | null;
    if (el && (el.tagName === "INPUT" || el.tagName === "TEXTAREA")) return;
    const label = labelForKey(event.key);
    if (label) {
      event.preventDefault();
      onLabel(label);
    }
  };
  target.addEventListener("keydown", handler);
  return () => target.removeEventListener("keydown", handler);
}
