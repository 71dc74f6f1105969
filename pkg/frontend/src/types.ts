/** Wire contract of the annotation service. Field names are bit-exact. */

export type Role = "annotator" | "adjudicator";

export interface Session {
  baseUrl: string;
  annotator: string;
  role: Role;
  token?: string;
}

export interface NextCard {
  sentence_id: string;
  text: string;
  firm_id: string;
  year: number;
  remaining: number;
}

export interface LabelResult {
  status: string;
  final_label?: string;
}

export interface Dispute {
  sentence_id: string;
  text: string;
  label_a: string;
  label_b: string;
}

export interface Progress {
  total: number;
  unlabeled: number;
  single: number;
  agreed: number;
  disputed: number;
  adjudicated: number;
  excluded: number;
  raw_agreement: number | null;
  kappa: number | null;
}

/** The eight substantive classes, in keyboard order 1..8. */
export const LABEL_CLASSES = [
  "AI",
  "BIG_DATA",
  "CLOUD_COMPUTING",
  "IOT",
  "BLOCKCHAIN",
  "MOBILE_INTERNET",
  "NON_NEW_DIGITAL",
  "NON_DIGITAL",
] as const;

/** The ninth button: the annotator's hard-to-label mark. The server stores
 * it as a label; a pair of them excludes the sentence, a conflict goes to
 * adjudication where the sentence may be excluded. */
export const HARD_SKIP = "EXCLUDED";

export const LABEL_DISPLAY: Record<string, string> = {
  AI: "AI",
  BIG_DATA: "Big data",
  CLOUD_COMPUTING: "Cloud computing",
  IOT: "Internet of things",
  BLOCKCHAIN: "Blockchain",
  MOBILE_INTERNET: "Mobile internet",
  NON_NEW_DIGITAL: "Non-new digital",
  NON_DIGITAL: "Non-digital",
  [HARD_SKIP]: "Hard / skip",
};
