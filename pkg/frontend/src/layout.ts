/** Initial node placement: spring-electrical layout with two extra terms.
 *
 * Plain force-direction happily leaves a node sitting on another edge's
 * line, which renders as one long ambiguous segment.  Two penalties fix
 * that: a perpendicular push whenever a node is near the infinite line of a
 * shown edge, and a torque whenever two shown edges at a shared endpoint
 * run at nearly equal slopes.  Deterministic for a given seed; coordinates
 * land in the unit square with a margin.
 */

import type { AssignmentJson } from "./types.js";
import { slotIndex, type Point } from "./round.js";

export const NODE_DIAMETER = 0.07; // in unit-square coordinates
const MARGIN = 0.08;
const ITERATIONS = 260;
const LINE_CLEARANCE = 0.55 * NODE_DIAMETER;

/** Deterministic 32-bit PRNG (mulberry32). */
export function makeRng(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function seedFromAssignment(a: AssignmentJson): number {
  let h = 2166136261 >>> 0; // FNV-1a over the identifying fields
  const s = `${a.chain_id}:${a.round_index}:${a.pg.n}`;
  for (let i = 0; i < s.length; i++) {
    h = Math.imul(h ^ s.charCodeAt(i), 16777619) >>> 0;
  }
  return h;
}

interface Vec {
  x: number;
  y: number;
}

function shownEdges(a: AssignmentJson): [number, number][] {
  return (a.pg.edges as [number, number][]).map(([i, j]) => [i, j]);
}

export function layoutInitial(a: AssignmentJson, seed?: number): Point[] {
  const n = a.pg.n;
  const rng = makeRng(seed ?? seedFromAssignment(a));
  const edges = shownEdges(a);
  const k = 0.9 / Math.sqrt(n); // ideal spring length in unit coordinates

  // circle start with jitter breaks symmetric stalemates deterministically
  const pos: Vec[] = [];
  for (let v = 0; v < n; v++) {
    const ang = (2 * Math.PI * v) / n + 0.2 * (rng() - 0.5);
    const rad = 0.35 + 0.1 * (rng() - 0.5);
    pos.push({ x: 0.5 + rad * Math.cos(ang), y: 0.5 + rad * Math.sin(ang) });
  }

  for (let it = 0; it < ITERATIONS; it++) {
    const temp = 0.08 * (1 - it / ITERATIONS) + 0.003;
    const disp: Vec[] = pos.map(() => ({ x: 0, y: 0 }));

    for (let u = 0; u < n; u++) {
      for (let v = u + 1; v < n; v++) {
        let dx = pos[u]!.x - pos[v]!.x;
        let dy = pos[u]!.y - pos[v]!.y;
        let d = Math.hypot(dx, dy);
        if (d < 1e-9) {
          dx = 1e-4 * (rng() - 0.5);
          dy = 1e-4 * (rng() - 0.5);
          d = Math.hypot(dx, dy);
        }
        const rep = (k * k) / d;
        disp[u]!.x += (dx / d) * rep;
        disp[u]!.y += (dy / d) * rep;
        disp[v]!.x -= (dx / d) * rep;
        disp[v]!.y -= (dy / d) * rep;
      }
    }

    for (const [u, v] of edges) {
      const dx = pos[u]!.x - pos[v]!.x;
      const dy = pos[u]!.y - pos[v]!.y;
      const d = Math.hypot(dx, dy) + 1e-9;
      const att = (d * d) / k;
      disp[u]!.x -= (dx / d) * att;
      disp[u]!.y -= (dy / d) * att;
      disp[v]!.x += (dx / d) * att;
      disp[v]!.y += (dy / d) * att;
    }

    // keep nodes off other edges' lines
    for (const [u, v] of edges) {
      for (let c = 0; c < n; c++) {
        if (c === u || c === v) continue;
        const ex = pos[v]!.x - pos[u]!.x;
        const ey = pos[v]!.y - pos[u]!.y;
        const len = Math.hypot(ex, ey) + 1e-9;
        const px = pos[c]!.x - pos[u]!.x;
        const py = pos[c]!.y - pos[u]!.y;
        const cross = (ex * py - ey * px) / len; // signed distance to the line
        if (Math.abs(cross) < 2 * LINE_CLEARANCE) {
          const push = 0.6 * (2 * LINE_CLEARANCE - Math.abs(cross));
          const sign = cross >= 0 ? 1 : -1;
          disp[c]!.x += sign * (-ey / len) * push;
          disp[c]!.y += sign * (ex / len) * push;
        }
      }
    }

    // separate near-equal slopes of edges sharing an endpoint
    for (let e1 = 0; e1 < edges.length; e1++) {
      for (let e2 = e1 + 1; e2 < edges.length; e2++) {
        const [a1, b1] = edges[e1]!;
        const [a2, b2] = edges[e2]!;
        const shared =
          a1 === a2 ? a1 : a1 === b2 ? a1 : b1 === a2 ? b1 : b1 === b2 ? b1 : -1;
        if (shared < 0) continue;
        const o1 = a1 === shared ? b1 : a1;
        const o2 = a2 === shared ? b2 : a2;
        const v1x = pos[o1]!.x - pos[shared]!.x;
        const v1y = pos[o1]!.y - pos[shared]!.y;
        const v2x = pos[o2]!.x - pos[shared]!.x;
        const v2y = pos[o2]!.y - pos[shared]!.y;
        const l1 = Math.hypot(v1x, v1y) + 1e-9;
        const l2 = Math.hypot(v2x, v2y) + 1e-9;
        const sinA = (v1x * v2y - v1y * v2x) / (l1 * l2);
        const cosA = (v1x * v2x + v1y * v2y) / (l1 * l2);
        if (Math.abs(sinA) < 0.25) {
          // rotate the farther endpoint away from collinearity
          const target = Math.abs(cosA) > 0 ? 0.02 : 0;
          const sign = sinA >= 0 ? 1 : -1;
          const turn = 0.3 * (0.25 - Math.abs(sinA)) + target;
          disp[o2]!.x += sign * (-v2y / l2) * turn * 0.5;
          disp[o2]!.y += sign * (v2x / l2) * turn * 0.5;
          disp[o1]!.x -= sign * (-v1y / l1) * turn * 0.5;
          disp[o1]!.y -= sign * (v1x / l1) * turn * 0.5;
        }
      }
    }

    for (let v = 0; v < n; v++) {
      const d = Math.hypot(disp[v]!.x, disp[v]!.y);
      if (d > 1e-12) {
        const step = Math.min(d, temp);
        pos[v]!.x += (disp[v]!.x / d) * step;
        pos[v]!.y += (disp[v]!.y / d) * step;
      }
      pos[v]!.x = Math.min(1 - MARGIN, Math.max(MARGIN, pos[v]!.x));
      pos[v]!.y = Math.min(1 - MARGIN, Math.max(MARGIN, pos[v]!.y));
    }
  }

  // deterministic repair loop: the soft forces only discourage violations,
  // these passes guarantee them away (or stop at the iteration cap)
  const minSep = NODE_DIAMETER * 1.05;
  const minSin = 0.03; // radians-ish: ban near-collinear edge pairs outright
  for (let pass = 0; pass < 200; pass++) {
    let moved = false;

    for (let u = 0; u < n; u++) {
      for (let v = u + 1; v < n; v++) {
        let dx = pos[v]!.x - pos[u]!.x;
        let dy = pos[v]!.y - pos[u]!.y;
        let d = Math.hypot(dx, dy);
        if (d < 1e-9) {
          dx = 1e-3;
          dy = 1e-3 * (u + 1);
          d = Math.hypot(dx, dy);
        }
        if (d < minSep) {
          const shift = (minSep - d) / 2 + 1e-4;
          pos[u]!.x -= (dx / d) * shift;
          pos[u]!.y -= (dy / d) * shift;
          pos[v]!.x += (dx / d) * shift;
          pos[v]!.y += (dy / d) * shift;
          moved = true;
        }
      }
    }

    // rotate apart edge pairs leaving a shared endpoint at equal slopes
    for (let e1 = 0; e1 < edges.length; e1++) {
      for (let e2 = e1 + 1; e2 < edges.length; e2++) {
        const [a1, b1] = edges[e1]!;
        const [a2, b2] = edges[e2]!;
        const shared =
          a1 === a2 ? a1 : a1 === b2 ? a1 : b1 === a2 ? b1 : b1 === b2 ? b1 : -1;
        if (shared < 0) continue;
        const o1 = a1 === shared ? b1 : a1;
        const o2 = a2 === shared ? b2 : a2;
        const v2x = pos[o2]!.x - pos[shared]!.x;
        const v2y = pos[o2]!.y - pos[shared]!.y;
        const v1x = pos[o1]!.x - pos[shared]!.x;
        const v1y = pos[o1]!.y - pos[shared]!.y;
        const l1 = Math.hypot(v1x, v1y) + 1e-9;
        const l2 = Math.hypot(v2x, v2y) + 1e-9;
        const sinA = (v1x * v2y - v1y * v2x) / (l1 * l2);
        if (Math.abs(sinA) < minSin) {
          const sign = sinA >= 0 || Object.is(sinA, 0) ? 1 : -1;
          const ang = sign * (0.1 - Math.abs(sinA));
          const c = Math.cos(ang);
          const s = Math.sin(ang);
          pos[o2]!.x = pos[shared]!.x + c * v2x - s * v2y;
          pos[o2]!.y = pos[shared]!.y + s * v2x + c * v2y;
          moved = true;
        }
      }
    }

    // push third nodes off shown edge segments
    for (const [u, v] of edges) {
      for (let cNode = 0; cNode < n; cNode++) {
        if (cNode === u || cNode === v) continue;
        const ex = pos[v]!.x - pos[u]!.x;
        const ey = pos[v]!.y - pos[u]!.y;
        const len2 = ex * ex + ey * ey;
        if (len2 < 1e-18) continue;
        let t = ((pos[cNode]!.x - pos[u]!.x) * ex + (pos[cNode]!.y - pos[u]!.y) * ey) / len2;
        t = Math.max(0, Math.min(1, t));
        const fx = pos[u]!.x + t * ex;
        const fy = pos[u]!.y + t * ey;
        let nx = pos[cNode]!.x - fx;
        let ny = pos[cNode]!.y - fy;
        let d = Math.hypot(nx, ny);
        if (d >= LINE_CLEARANCE) continue;
        if (d < 1e-9) {
          const len = Math.sqrt(len2);
          nx = -ey / len;
          ny = ex / len;
          d = 1;
        }
        pos[cNode]!.x = fx + (nx / d) * (LINE_CLEARANCE + 1e-3);
        pos[cNode]!.y = fy + (ny / d) * (LINE_CLEARANCE + 1e-3);
        moved = true;
      }
    }

    for (let v = 0; v < n; v++) {
      pos[v]!.x = Math.min(1 - MARGIN / 2, Math.max(MARGIN / 2, pos[v]!.x));
      pos[v]!.y = Math.min(1 - MARGIN / 2, Math.max(MARGIN / 2, pos[v]!.y));
    }
    if (!moved) break;
  }

  return pos.map((p) => ({ x: p.x, y: p.y }));
}

/** Distance from node c to the segment (u, v); used by layout checks. */
export function pointSegmentDistance(c: Point, u: Point, v: Point): number {
  const ex = v.x - u.x;
  const ey = v.y - u.y;
  const len2 = ex * ex + ey * ey;
  if (len2 < 1e-18) return Math.hypot(c.x - u.x, c.y - u.y);
  let t = ((c.x - u.x) * ex + (c.y - u.y) * ey) / len2;
  t = Math.max(0, Math.min(1, t));
  return Math.hypot(c.x - (u.x + t * ex), c.y - (u.y + t * ey));
}

/** True when edges (a,b) and (a,c) leave their shared endpoint collinearly. */
export function collinearThroughShared(
  shared: Point,
  p1: Point,
  p2: Point,
  tol = 1e-3,
): boolean {
  const v1x = p1.x - shared.x;
  const v1y = p1.y - shared.y;
  const v2x = p2.x - shared.x;
  const v2y = p2.y - shared.y;
  const l1 = Math.hypot(v1x, v1y);
  const l2 = Math.hypot(v2x, v2y);
  if (l1 < 1e-9 || l2 < 1e-9) return true;
  return Math.abs((v1x * v2y - v1y * v2x) / (l1 * l2)) < tol;
}

/** Shown-edge slot pairs of an assignment, for geometry checks. */
export function shownSlotPairs(a: AssignmentJson): [number, number][] {
  return (a.pg.edges as [number, number][]).map(([i, j]) => {
    slotIndex(i, j, a.pg.n); // validates the pair
    return [i, j];
  });
}
