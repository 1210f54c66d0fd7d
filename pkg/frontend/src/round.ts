/** Round editing state machine.
 *
 * The round is driven by a flat event stream (clicks, drags, clock ticks) so
 * the whole interaction surface is scriptable in tests.  Locked relations
 * come from the assignment: shown edges cannot be removed, shown non-edges
 * cannot gain an edge; only the obscured pairs are editable.  All rejections
 * are feedback marks, never exceptions.
 */

import type { AssignmentJson, Telemetry } from "./types.js";

export type SlotState = "present" | "absent" | "free";

export interface Point {
  x: number;
  y: number;
}

export type RoundEvent =
  | { type: "clickNode"; node: number }
  | { type: "clickEdge"; i: number; j: number }
  | { type: "dragNode"; node: number; x: number; y: number }
  | { type: "tick"; ms: number };

export interface Mark {
  kind: "reject-add" | "reject-remove";
  i: number;
  j: number;
  ttlMs: number;
}

export interface RoundView {
  n: number;
  locks: SlotState[]; // per slot in canonical pair order
  edges: boolean[]; // per slot; invariant: locks respected
  positions: Point[];
  selected: number | null;
  marks: Mark[];
  elapsedMs: number;
  movedNodes: Set<number>;
}

export const MARK_TTL_MS = 600;

export function pairCount(n: number): number {
  return (n * (n - 1)) / 2;
}

/** Slot index of pair {i, j} under the canonical order (0,1),(0,2),... */
export function slotIndex(i: number, j: number, n: number): number {
  if (i === j || i < 0 || j < 0 || i >= n || j >= n) {
    throw new Error(`bad pair (${i}, ${j}) for n=${n}`);
  }
  const [a, b] = i < j ? [i, j] : [j, i];
  return a * n - (a * (a + 1)) / 2 + (b - a - 1);
}

export function slotPair(s: number, n: number): [number, number] {
  let i = 0;
  let rowEnd = n - 1;
  while (s >= rowEnd) {
    s -= rowEnd;
    i += 1;
    rowEnd = n - 1 - i;
  }
  return [i, i + 1 + s];
}

export function createRound(
  assignment: AssignmentJson,
  positions: Point[],
): RoundView {
  const n = assignment.pg.n;
  if (positions.length !== n) throw new Error("positions/node count mismatch");
  const locks: SlotState[] = new Array(pairCount(n)).fill("free");
  const edges: boolean[] = new Array(pairCount(n)).fill(false);
  for (const [i, j] of assignment.pg.edges as [number, number][]) {
    const s = slotIndex(i, j, n);
    locks[s] = "present";
    edges[s] = true;
  }
  for (const [i, j] of assignment.pg.absent as [number, number][]) {
    locks[slotIndex(i, j, n)] = "absent";
  }
  // obscured slots stay "free" and start with no edge drawn
  return {
    n,
    locks,
    edges,
    positions: positions.map((p) => ({ ...p })),
    selected: null,
    marks: [],
    elapsedMs: 0,
    movedNodes: new Set(),
  };
}

function pushMark(view: RoundView, kind: Mark["kind"], i: number, j: number) {
  view.marks.push({ kind, i, j, ttlMs: MARK_TTL_MS });
}

function resolvePair(view: RoundView, i: number, j: number) {
  const s = slotIndex(i, j, view.n);
  switch (view.locks[s]) {
    case "absent":
      pushMark(view, "reject-add", i, j); // red X: this relation is known absent
      break;
    case "present":
      break; // already drawn and locked; adding is a no-op
    case "free":
      view.edges[s] = true; // node-then-node only ever adds
      break;
  }
}

/** Apply one event in place and return the view for chaining. */
export function applyEvent(view: RoundView, ev: RoundEvent): RoundView {
  switch (ev.type) {
    case "clickNode": {
      if (ev.node < 0 || ev.node >= view.n) break;
      if (view.selected === null) {
        view.selected = ev.node;
      } else if (view.selected === ev.node) {
        view.selected = null; // clicking the selected node deselects
      } else {
        const first = view.selected;
        view.selected = null;
        resolvePair(view, first, ev.node);
      }
      break;
    }
    case "clickEdge": {
      const s = slotIndex(ev.i, ev.j, view.n);
      if (!view.edges[s]) break; // no line rendered there; nothing to click
      if (view.locks[s] === "present") {
        pushMark(view, "reject-remove", ev.i, ev.j);
      } else {
        view.edges[s] = false;
      }
      break;
    }
    case "dragNode": {
      if (ev.node < 0 || ev.node >= view.n) break;
      view.positions[ev.node] = { x: ev.x, y: ev.y };
      view.movedNodes.add(ev.node);
      break;
    }
    case "tick": {
      view.elapsedMs += ev.ms;
      view.marks = view.marks
        .map((m) => ({ ...m, ttlMs: m.ttlMs - ev.ms }))
        .filter((m) => m.ttlMs > 0);
      break;
    }
  }
  return view;
}

export function applyAll(view: RoundView, events: Iterable<RoundEvent>): RoundView {
  for (const ev of events) applyEvent(view, ev);
  return view;
}

/** Edge list for submission: exactly the slots drawn as present. */
export function payloadEdges(view: RoundView): number[][] {
  const out: number[][] = [];
  for (let s = 0; s < view.edges.length; s++) {
    if (view.edges[s]) out.push([...slotPair(s, view.n)]);
  }
  return out;
}

export function telemetry(view: RoundView): Telemetry {
  return {
    elapsed_seconds: view.elapsedMs / 1000,
    nodes_moved: view.movedNodes.size,
  };
}

export interface SceneEdge {
  i: number;
  j: number;
  locked: boolean;
}

export interface Scene {
  nodes: { id: number; x: number; y: number; selected: boolean }[];
  edges: SceneEdge[];
  marks: Mark[];
}

/** Display list for the renderer; tests check it against the payload. */
export function renderScene(view: RoundView): Scene {
  const edges: SceneEdge[] = [];
  for (let s = 0; s < view.edges.length; s++) {
    if (view.edges[s]) {
      const [i, j] = slotPair(s, view.n);
      edges.push({ i, j, locked: view.locks[s] === "present" });
    }
  }
  return {
    nodes: view.positions.map((p, id) => ({
      id,
      x: p.x,
      y: p.y,
      selected: view.selected === id,
    })),
    edges,
    marks: [...view.marks],
  };
}
