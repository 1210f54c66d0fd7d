/** Browser wiring: canvas renderer + event translation for SessionFlow.
 *
 * Everything interesting lives in the pure modules; this file only maps DOM
 * events to RoundEvents, draws the Scene, and swaps phase screens.
 */

import { ChainClient } from "./api.js";
import { NODE_DIAMETER } from "./layout.js";
import { renderScene, slotIndex, type RoundView } from "./round.js";
import { introText, quizQuestions } from "./quiz.js";
import { SessionFlow } from "./session.js";
import type { Story } from "./types.js";
import { STORIES } from "./types.js";

const CANVAS = 560;
const R = (NODE_DIAMETER / 2) * CANVAS;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text = "",
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  if (text) node.textContent = text;
  return node;
}

function draw(ctx: CanvasRenderingContext2D, view: RoundView, labels: string[]) {
  const scene = renderScene(view);
  ctx.clearRect(0, 0, CANVAS, CANVAS);
  ctx.lineWidth = 2.5;
  for (const e of scene.edges) {
    const a = scene.nodes[e.i]!;
    const b = scene.nodes[e.j]!;
    ctx.strokeStyle = e.locked ? "#333" : "#1668c9";
    ctx.beginPath();
    ctx.moveTo(a.x * CANVAS, a.y * CANVAS);
    ctx.lineTo(b.x * CANVAS, b.y * CANVAS);
    ctx.stroke();
  }
  for (const m of scene.marks) {
    const a = scene.nodes[m.i]!;
    const b = scene.nodes[m.j]!;
    const mx = ((a.x + b.x) / 2) * CANVAS;
    const my = ((a.y + b.y) / 2) * CANVAS;
    ctx.strokeStyle = "#d11";
    ctx.lineWidth = 3;
    ctx.beginPath();
    ctx.moveTo(mx - 9, my - 9);
    ctx.lineTo(mx + 9, my + 9);
    ctx.moveTo(mx + 9, my - 9);
    ctx.lineTo(mx - 9, my + 9);
    ctx.stroke();
    ctx.lineWidth = 2.5;
  }
  for (const nd of scene.nodes) {
    ctx.beginPath();
    ctx.arc(nd.x * CANVAS, nd.y * CANVAS, R, 0, 2 * Math.PI);
    ctx.fillStyle = nd.selected ? "#ffd966" : "#f2f2f2";
    ctx.fill();
    ctx.strokeStyle = "#333";
    ctx.stroke();
    ctx.fillStyle = "#222";
    ctx.font = "11px sans-serif";
    ctx.textAlign = "center";
    ctx.fillText(labels[nd.id] ?? String(nd.id), nd.x * CANVAS, nd.y * CANVAS + 4);
  }
}

function hitNode(view: RoundView, x: number, y: number): number | null {
  for (let v = 0; v < view.n; v++) {
    const p = view.positions[v]!;
    if (Math.hypot(p.x * CANVAS - x, p.y * CANVAS - y) <= R + 2) return v;
  }
  return null;
}

function hitEdge(view: RoundView, x: number, y: number): [number, number] | null {
  for (let i = 0; i < view.n; i++) {
    for (let j = i + 1; j < view.n; j++) {
      if (!view.edges[slotIndex(i, j, view.n)]) continue;
      const a = view.positions[i]!;
      const b = view.positions[j]!;
      const ax = a.x * CANVAS, ay = a.y * CANVAS;
      const bx = b.x * CANVAS, by = b.y * CANVAS;
      const len2 = (bx - ax) ** 2 + (by - ay) ** 2;
      const t = Math.max(0, Math.min(1, ((x - ax) * (bx - ax) + (y - ay) * (by - ay)) / len2));
      const d = Math.hypot(x - (ax + t * (bx - ax)), y - (ay + t * (by - ay)));
      if (d <= 6) return [i, j];
    }
  }
  return null;
}

export function mount(root: HTMLElement, base: string): void {
  const params = new URLSearchParams(location.search);
  const story = (params.get("story") ?? "class") as Story;
  if (!STORIES.includes(story)) throw new Error(`unknown story ${story}`);
  const flow = new SessionFlow(new ChainClient(params.get("api") ?? base), story);
  let ticker: number | undefined;

  function render() {
    root.replaceChildren();
    const phase = flow.phase;
    if (phase.name === "instructions") {
      root.append(el("p", {}, introText(story)));
      const btn = el("button", {}, "Continue");
      btn.onclick = () => {
        flow.beginQuiz();
        render();
      };
      root.append(btn);
    } else if (phase.name === "quiz") {
      const q = quizQuestions(story)[phase.quiz.index];
      if (!q) return;
      root.append(el("p", {}, q.prompt));
      if (phase.quiz.failed) root.append(el("p", { class: "error" }, q.explanation));
      q.options.forEach((opt, idx) => {
        const btn = el("button", { class: "option" }, opt);
        btn.onclick = async () => {
          flow.answerQuizOption(idx);
          if (flow.quizPassed()) await flow.nextRound();
          render();
        };
        root.append(btn);
      });
    } else if (phase.name === "round") {
      const { assignment, view } = phase;
      root.append(el("p", {}, assignment.shown_list.join(" ")));
      const canvas = el("canvas", { width: String(CANVAS), height: String(CANVAS) });
      const ctx = canvas.getContext("2d")!;
      let dragging: number | null = null;
      let dragMoved = false;
      canvas.onmousedown = (ev) => {
        dragging = hitNode(view, ev.offsetX, ev.offsetY);
        dragMoved = false;
      };
      canvas.onmousemove = (ev) => {
        if (dragging === null) return;
        dragMoved = true;
        flow.handleRoundEvent({
          type: "dragNode",
          node: dragging,
          x: ev.offsetX / CANVAS,
          y: ev.offsetY / CANVAS,
        });
        draw(ctx, view, assignment.labels);
      };
      canvas.onmouseup = (ev) => {
        if (dragging !== null && !dragMoved) {
          flow.handleRoundEvent({ type: "clickNode", node: dragging });
        } else if (dragging === null) {
          const hit = hitEdge(view, ev.offsetX, ev.offsetY);
          if (hit) flow.handleRoundEvent({ type: "clickEdge", i: hit[0], j: hit[1] });
        }
        dragging = null;
        draw(ctx, view, assignment.labels);
      };
      root.append(canvas);
      const done = el("button", {}, "Done!");
      done.onclick = async () => {
        const verdict = await flow.submitRound();
        if (verdict.verdict === "rejected") {
          // unreachable through the UI (locks pre-validate), kept as a guard
          draw(ctx, view, assignment.labels);
        }
        render();
      };
      root.append(done);
      clearInterval(ticker);
      ticker = window.setInterval(() => {
        flow.handleRoundEvent({ type: "tick", ms: 100 });
        if (flow.phase.name === "round") draw(ctx, view, assignment.labels);
      }, 100);
      draw(ctx, view, assignment.labels);
    } else if (phase.name === "question") {
      clearInterval(ticker);
      root.append(el("p", {}, phase.question.prompt));
      phase.question.labels.forEach((label, idx) => {
        const btn = el("button", { class: "option" }, label);
        btn.onclick = async () => {
          flow.pickQuestionNode(idx);
          await flow.submitQuestion();
          render();
        };
        root.append(btn);
      });
    } else if (phase.name === "completed") {
      clearInterval(ticker);
      root.append(
        el("p", {}, `All ${phase.rounds} rounds done. Score: ${phase.totalScore}. Thank you!`),
      );
    } else {
      root.append(el("p", { class: "error" }, phase.message));
    }
  }

  flow
    .start()
    .then(render)
    .catch((err: unknown) => {
      flow.phase = { name: "error", message: String(err) };
      render();
    });
}
