/** Abbreviated instructions plus the three comprehension questions.
 *
 * One intro page per cover story, then three multiple-choice checks a
 * participant must pass before the rounds start.  Wrong answers show the
 * explanation and let them retry.
 */

import type { Story } from "./types.js";

export interface QuizQuestion {
  prompt: string;
  options: string[];
  correct: number; // index into options
  explanation: string;
}

const STORY_INTRO: Record<Story, string> = {
  class:
    "You will see groups of students from the same class. Some pairs are " +
    "marked as friends or not friends; the rest are covered. Drag the " +
    "people around, then fill in the covered friendships the way you think " +
    "they really are.",
  work:
    "You will see groups of coworkers from the same office. Some pairs are " +
    "marked as friends or not friends; the rest are covered. Drag the " +
    "people around, then fill in the covered friendships the way you think " +
    "they really are.",
  park:
    "You will see maps of landmarks in a national park. Some pairs are " +
    "marked as connected by a trail or not; the rest are covered. Drag the " +
    "landmarks around, then fill in the covered trails the way you think " +
    "they really are.",
  city:
    "You will see maps of districts in a city. Some pairs are marked as " +
    "sharing a border or not; the rest are covered. Drag the districts " +
    "around, then fill in the covered borders the way you think they " +
    "really are.",
};

const SHARED_RULES =
  "Connections listed as known cannot be changed: trying to draw one that " +
  "is known to be absent shows a red X, and known connections cannot be " +
  "removed. To draw a connection, click one item and then the other; to " +
  "remove one you drew, click the line itself. Press Done when the picture " +
  "looks right, then answer one short question about it.";

export function introText(story: Story): string {
  return `${STORY_INTRO[story]} ${SHARED_RULES}`;
}

export function quizQuestions(story: Story): QuizQuestion[] {
  const thing =
    story === "park" ? "trail" : story === "city" ? "border" : "friendship";
  return [
    {
      prompt: `What happens if you try to draw a ${thing} on a pair that is known not to have one?`,
      options: [
        `The ${thing} is drawn anyway.`,
        "A red X appears and nothing is drawn.",
        "The round ends immediately.",
      ],
      correct: 1,
      explanation:
        "Known relations are fixed: the interface marks the attempt with a red X and leaves the picture unchanged.",
    },
    {
      prompt: "Which relations are you asked to fill in?",
      options: [
        "Only the covered ones.",
        "All of them, including the ones already marked.",
        "None; you only move things around.",
      ],
      correct: 0,
      explanation:
        "The marked relations are given. Your job is to decide the covered ones.",
    },
    {
      prompt: `How do you remove a ${thing} you drew by mistake?`,
      options: [
        "Double-click either endpoint.",
        "Click directly on the line you drew.",
        "Press the Done button twice.",
      ],
      correct: 1,
      explanation: "Clicking a line you drew removes it; endpoints only add.",
    },
  ];
}

export interface QuizState {
  index: number; // current question
  failed: boolean; // last answer was wrong
  passed: boolean;
}

export function startQuiz(): QuizState {
  return { index: 0, failed: false, passed: false };
}

export function answerQuiz(
  state: QuizState,
  story: Story,
  option: number,
): QuizState {
  if (state.passed) return state;
  const questions = quizQuestions(story);
  const q = questions[state.index];
  if (!q) return state;
  if (option !== q.correct) return { ...state, failed: true };
  const next = state.index + 1;
  return { index: next, failed: false, passed: next >= questions.length };
}
