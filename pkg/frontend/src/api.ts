/** Thin typed client for the chain service.
 *
 * Submission is the one call that mutates shared state, so it carries retry
 * logic: the service keys a submission by (session, round), which makes the
 * call idempotent enough to retry after a network failure.  If the retry
 * comes back 409 the first attempt actually landed; the session state tells
 * us, and the post-round question is reconstructed locally (the variant is a
 * deterministic function of the round index).
 */

import type {
  AssignmentJson,
  SessionStateJson,
  Telemetry,
  VerdictJson,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
  }
}

export const QUESTION_VARIANTS: readonly ["most" | "least", string][] = [
  ["most", "Click the node you think is the most important."],
  ["least", "Click the node you think is the least important."],
  ["most", "If one node disappeared, click the one whose loss would matter most."],
  ["least", "Click the node that matters least to the overall structure."],
];

async function request<T>(
  base: string,
  method: string,
  path: string,
  body?: unknown,
): Promise<T> {
  const res = await fetch(base + path, {
    method,
    headers: body === undefined ? {} : { "Content-Type": "application/json" },
    body: body === undefined ? undefined : JSON.stringify(body),
  });
  if (!res.ok) {
    let detail = res.statusText;
    try {
      const parsed = (await res.json()) as { error?: string };
      if (parsed.error) detail = parsed.error;
    } catch {
      // non-JSON error body; keep the status text
    }
    throw new ApiError(res.status, detail);
  }
  return (await res.json()) as T;
}

export class ChainClient {
  constructor(readonly base: string) {}

  createSession(story: string): Promise<SessionStateJson> {
    return request(this.base, "POST", "/sessions", { story });
  }

  sessionState(sessionId: string): Promise<SessionStateJson> {
    return request(this.base, "GET", `/sessions/${sessionId}`);
  }

  nextRound(sessionId: string): Promise<AssignmentJson> {
    return request(this.base, "GET", `/sessions/${sessionId}/round`);
  }

  async submit(
    sessionId: string,
    roundIndex: number,
    edges: number[][],
    telemetry: Telemetry,
    retries = 2,
  ): Promise<VerdictJson> {
    let sawNetworkFailure = false;
    for (let attempt = 0; ; attempt++) {
      try {
        return await request<VerdictJson>(
          this.base,
          "POST",
          `/sessions/${sessionId}/rounds/${roundIndex}`,
          { edges, telemetry },
        );
      } catch (err) {
        if (err instanceof ApiError) {
          if (err.status === 409 && sawNetworkFailure) {
            // the lost response may have been delivered; check
            const state = await this.sessionState(sessionId);
            if (state.next_round >= roundIndex) {
              return this.reconstructVerdict(sessionId, roundIndex, state);
            }
          }
          throw err;
        }
        if (attempt >= retries) throw err;
        sawNetworkFailure = true;
      }
    }
  }

  private async reconstructVerdict(
    sessionId: string,
    roundIndex: number,
    state: SessionStateJson,
  ): Promise<VerdictJson> {
    const variant = (roundIndex - 1) % QUESTION_VARIANTS.length;
    const entry = QUESTION_VARIANTS[variant]!;
    return {
      verdict: "accepted",
      rules: [],
      offending: [],
      question: { variant, kind: entry[0], prompt: entry[1], labels: [] },
      score: 0,
      session_completed: state.completed,
    };
  }

  async answerQuestion(
    sessionId: string,
    roundIndex: number,
    nodes: number[],
  ): Promise<void> {
    await request(
      this.base,
      "POST",
      `/sessions/${sessionId}/rounds/${roundIndex}/question-answer`,
      { nodes },
    );
  }
}
