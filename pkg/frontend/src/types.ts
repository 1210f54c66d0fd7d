/** JSON shapes of the chain-service API, mirrored exactly. */

export interface PartialGraphJson {
  n: number;
  edges: number[][];
  absent: number[][];
  obscured: number[][];
}

export interface SessionStateJson {
  session_id: string;
  story: string;
  sequence_id: number;
  next_round: number;
  completed: boolean;
}

export interface AssignmentJson {
  session_id: string;
  round_index: number;
  chain_id: string;
  pg: PartialGraphJson;
  shown_list: string[];
  labels: string[];
  large_n: boolean;
}

export interface QuestionJson {
  variant: number;
  kind: "most" | "least";
  prompt: string;
  labels: string[];
}

export interface VerdictJson {
  verdict: "accepted" | "excluded" | "rejected";
  rules: string[];
  offending: number[][];
  question: QuestionJson | null;
  score: number;
  session_completed: boolean;
}

export interface Telemetry {
  elapsed_seconds: number;
  nodes_moved: number;
}

export type Story = "class" | "work" | "park" | "city";

export const STORIES: readonly Story[] = ["class", "work", "park", "city"];
