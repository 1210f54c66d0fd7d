/** Session flow: instructions -> quiz -> 16 x (round -> question) -> done.
 *
 * The flow object owns the server conversation and exposes a small surface
 * the renderer subscribes to.  All server calls are sequential; one round is
 * active at a time.  A rejected submission (contradicting a shown relation,
 * which the client pre-validation makes unreachable through the UI) keeps
 * the same round open with the offending pairs highlighted.
 */

import { ChainClient } from "./api.js";
import { layoutInitial } from "./layout.js";
import {
  applyEvent,
  createRound,
  payloadEdges,
  telemetry,
  type RoundEvent,
  type RoundView,
} from "./round.js";
import { answerQuiz, startQuiz, type QuizState } from "./quiz.js";
import type {
  AssignmentJson,
  QuestionJson,
  Story,
  VerdictJson,
} from "./types.js";

export type Phase =
  | { name: "instructions" }
  | { name: "quiz"; quiz: QuizState }
  | { name: "round"; assignment: AssignmentJson; view: RoundView }
  | {
      name: "question";
      assignment: AssignmentJson;
      question: QuestionJson;
      verdict: VerdictJson;
      picked: number[];
    }
  | { name: "completed"; rounds: number; totalScore: number }
  | { name: "error"; message: string };

export class SessionFlow {
  phase: Phase = { name: "instructions" };
  sessionId = "";
  totalScore = 0;
  roundsDone = 0;
  lastOffending: number[][] = [];

  constructor(
    readonly client: ChainClient,
    readonly story: Story,
  ) {}

  /** Fresh read of the phase; mutating methods reassign it. */
  currentPhase(): Phase {
    return this.phase;
  }

  async start(): Promise<void> {
    const state = await this.client.createSession(this.story);
    this.sessionId = state.session_id;
    this.phase = { name: "instructions" };
  }

  beginQuiz(): void {
    if (this.phase.name !== "instructions") return;
    this.phase = { name: "quiz", quiz: startQuiz() };
  }

  answerQuizOption(option: number): void {
    if (this.phase.name !== "quiz") return;
    const quiz = answerQuiz(this.phase.quiz, this.story, option);
    this.phase = { name: "quiz", quiz };
  }

  quizPassed(): boolean {
    return this.phase.name === "quiz" && this.phase.quiz.passed;
  }

  async nextRound(): Promise<void> {
    const assignment = await this.client.nextRound(this.sessionId);
    const view = createRound(assignment, layoutInitial(assignment));
    this.lastOffending = [];
    this.phase = { name: "round", assignment, view };
  }

  handleRoundEvent(ev: RoundEvent): void {
    if (this.phase.name !== "round") return;
    applyEvent(this.phase.view, ev);
  }

  async submitRound(): Promise<VerdictJson> {
    if (this.phase.name !== "round") throw new Error("no active round");
    const { assignment, view } = this.phase;
    const verdict = await this.client.submit(
      this.sessionId,
      assignment.round_index,
      payloadEdges(view),
      telemetry(view),
    );
    if (verdict.verdict === "rejected") {
      // round stays open; highlight what contradicted the stimulus
      this.lastOffending = verdict.offending;
      return verdict;
    }
    this.totalScore += verdict.score;
    this.roundsDone = assignment.round_index;
    if (verdict.question) {
      this.phase = {
        name: "question",
        assignment,
        question: verdict.question,
        verdict,
        picked: [],
      };
    } else {
      this.phase = { name: "completed", rounds: this.roundsDone, totalScore: this.totalScore };
    }
    return verdict;
  }

  pickQuestionNode(node: number): void {
    if (this.phase.name !== "question") return;
    this.phase.picked = [node];
  }

  async submitQuestion(): Promise<void> {
    if (this.phase.name !== "question") throw new Error("no open question");
    const { assignment, verdict, picked } = this.phase;
    await this.client.answerQuestion(
      this.sessionId,
      assignment.round_index,
      picked,
    );
    if (verdict.session_completed) {
      this.phase = {
        name: "completed",
        rounds: this.roundsDone,
        totalScore: this.totalScore,
      };
    } else {
      await this.nextRound();
    }
  }
}
