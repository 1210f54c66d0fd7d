"""Live experiment backend: sessions, chain allocation, verdicts, logging.

The core is framework-free (ChainService); create_app wraps it in a FastAPI
HTTP layer.  All state changes go through an append-only JSON-lines event log
so a crashed service rebuilds itself by replay.
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, ProtocolError
from .graphs import (
    Graph,
    PartialGraph,
    pair_count,
    partial_graph_from_json,
    partial_graph_to_json,
    slot_pairs,
)
from .pipeline import STORIES, ResponseRecord, record_rule_violations

# the six fixed (n, shown) round sequences; a session is assigned one uniformly
ROUND_SEQUENCES: tuple[tuple[tuple[int, int], ...], ...] = (
    ((4, 2), (4, 4), (5, 3), (5, 7), (6, 5), (6, 7), (7, 6), (7, 9),
     (8, 7), (8, 12), (10, 8), (10, 19), (12, 8), (12, 28), (15, 20), (15, 40)),
    ((4, 4), (4, 2), (5, 7), (5, 3), (6, 7), (6, 5), (7, 9), (7, 6),
     (8, 12), (8, 7), (10, 19), (10, 8), (12, 28), (12, 8), (15, 40), (15, 20)),
    ((4, 5), (5, 5), (6, 7), (7, 9), (8, 12), (10, 19), (12, 28), (15, 10),
     (4, 3), (5, 1), (6, 5), (7, 6), (8, 7), (10, 8), (12, 15), (15, 10)),
    ((4, 3), (5, 1), (6, 5), (7, 6), (8, 7), (10, 8), (12, 15), (15, 10),
     (4, 5), (5, 5), (6, 7), (7, 9), (8, 12), (10, 19), (12, 28), (15, 10)),
    ((4, 3), (5, 9), (6, 7), (7, 9), (8, 12), (10, 19), (12, 15), (15, 40),
     (15, 10), (12, 8), (10, 8), (8, 7), (7, 6), (6, 5), (5, 5), (4, 1)),
    ((4, 1), (5, 5), (6, 5), (7, 6), (8, 7), (10, 8), (12, 8), (15, 10),
     (15, 40), (12, 15), (10, 19), (8, 12), (7, 9), (6, 7), (5, 9), (4, 3)),
)

ROUNDS_PER_SESSION = 16
CHAIN_TARGET = 12  # accepted responses per chain
DENSITY_CYCLE = tuple(round(0.05 + 0.1 * i, 2) for i in range(10))
LEASE_SECONDS = 30 * 60.0
LARGE_N_THRESHOLD = 10  # served normally, flagged for edge-only analysis

RELATION_TEXT = {
    "class": ("{a} and {b} are friends.", "{a} and {b} are not friends."),
    "work": ("{a} and {b} are friends.", "{a} and {b} are not friends."),
    "park": ("There is a trail between {a} and {b}.",
             "There is no trail between {a} and {b}."),
    "city": ("{a} and {b} share a border.", "{a} and {b} do not share a border."),
}

QUESTION_VARIANTS = (
    ("most", "Click the node you think is the most important."),
    ("least", "Click the node you think is the least important."),
    ("most", "If one node disappeared, click the one whose loss would matter most."),
    ("least", "Click the node that matters least to the overall structure."),
)

SURNAMES = (
    "Smith", "Johnson", "Williams", "Brown", "Jones", "Garcia", "Miller",
    "Davis", "Rodriguez", "Martinez", "Hernandez", "Lopez", "Gonzalez",
    "Wilson", "Anderson", "Thomas", "Taylor", "Moore", "Jackson", "Martin",
    "Lee", "Perez", "Thompson", "White", "Harris", "Sanchez", "Clark",
    "Ramirez", "Lewis", "Robinson", "Walker", "Young", "Allen", "King",
    "Wright", "Scott", "Torres", "Nguyen", "Hill", "Flores", "Green",
    "Adams", "Nelson", "Baker", "Hall", "Rivera", "Campbell", "Mitchell",
    "Carter", "Roberts", "Gomez", "Phillips", "Evans", "Turner", "Diaz",
    "Parker", "Cruz", "Edwards", "Collins", "Reyes", "Stewart", "Morris",
    "Morales", "Murphy", "Cook", "Rogers", "Gutierrez", "Ortiz", "Morgan",
    "Cooper", "Peterson", "Bailey", "Reed", "Kelly", "Howard", "Ramos",
    "Kim", "Cox", "Ward", "Richardson", "Watson", "Brooks", "Chavez",
    "Wood", "James", "Bennett", "Gray", "Mendoza", "Ruiz", "Hughes",
    "Price", "Alvarez", "Castillo", "Sanders", "Patel", "Myers", "Long",
    "Ross", "Foster", "Jimenez", "Powell", "Jenkins", "Perry", "Russell",
    "Sullivan", "Bell", "Coleman", "Butler", "Henderson", "Barnes",
    "Gonzales", "Fisher", "Vasquez", "Simmons", "Romero", "Jordan",
    "Patterson", "Alexander", "Hamilton", "Graham", "Reynolds", "Griffin",
    "Wallace", "Moreno", "West", "Cole", "Hayes", "Bryant", "Herrera",
    "Gibson", "Ellis", "Tran", "Medina", "Aguilar", "Stevens", "Murray",
    "Ford", "Castro", "Marshall", "Owens", "Harrison", "Fernandez",
    "McDonald", "Woods", "Washington", "Kennedy", "Wells", "Vargas",
    "Henry", "Chen", "Freeman", "Webb", "Tucker", "Guzman", "Burns",
    "Crawford", "Olson", "Simpson", "Porter", "Hunter", "Gordon", "Mendez",
    "Silva", "Shaw", "Snyder", "Mason", "Dixon", "Munoz", "Hunt", "Hicks",
    "Holmes", "Palmer", "Wagner", "Black", "Robertson", "Boyd", "Rose",
    "Stone", "Salazar", "Fox", "Warren", "Mills", "Meyer", "Rice",
    "Schmidt", "Garza", "Daniels", "Ferguson", "Nichols", "Stephens",
    "Soto", "Weaver", "Ryan", "Gardner", "Payne", "Grant", "Dunn",
    "Kelley", "Spencer", "Hawkins",
)


@dataclass(frozen=True)
class ChainState:
    chain_id: str
    story: str
    n: int
    s: int
    current: Graph
    length: int

    @property
    def status(self) -> str:
        return "full" if self.length >= CHAIN_TARGET else "open"

    def to_json(self) -> dict:
        return {
            "chain_id": self.chain_id,
            "story": self.story,
            "n": self.n,
            "s": self.s,
            "current": {"n": self.current.n, "edges": [list(e) for e in self.current.edges()]},
            "length": self.length,
            "status": self.status,
        }


@dataclass(frozen=True)
class SessionState:
    session_id: str
    story: str
    sequence_id: int
    next_round: int  # completed rounds so far, 0..16
    completed: bool

    def to_json(self) -> dict:
        return {
            "session_id": self.session_id,
            "story": self.story,
            "sequence_id": self.sequence_id,
            "next_round": self.next_round,
            "completed": self.completed,
        }


@dataclass(frozen=True)
class RoundAssignment:
    session_id: str
    round_index: int  # 1..16 within the session
    chain_id: str
    pg: PartialGraph
    shown_list: tuple[str, ...]
    labels: tuple[str, ...]
    large_n: bool

    def to_json(self) -> dict:
        return {
            "session_id": self.session_id,
            "round_index": self.round_index,
            "chain_id": self.chain_id,
            "pg": partial_graph_to_json(self.pg),
            "shown_list": list(self.shown_list),
            "labels": list(self.labels),
            "large_n": self.large_n,
        }


@dataclass(frozen=True)
class Verdict:
    verdict: str  # "accepted" | "excluded" | "rejected"
    rules: tuple[str, ...] = ()
    offending: tuple[tuple[int, int], ...] = ()
    question: dict | None = None
    score: int = 0
    session_completed: bool = False

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict,
            "rules": list(self.rules),
            "offending": [list(p) for p in self.offending],
            "question": self.question,
            "score": self.score,
            "session_completed": self.session_completed,
        }


@dataclass
class _Chain:
    chain_id: str
    story: str
    n: int
    s: int
    current: Graph
    length: int = 0
    leased_to: tuple[str, int] | None = None
    leased_until: float = 0.0

    def snapshot(self) -> ChainState:
        return ChainState(self.chain_id, self.story, self.n, self.s, self.current, self.length)


@dataclass
class _Pending:
    round_index: int
    chain_id: str
    pg: PartialGraph
    labels: tuple[str, ...]
    expires_at: float
    answered: bool = False
    question: dict | None = None


@dataclass
class _Session:
    session_id: str
    story: str
    sequence_id: int
    pool: tuple[str, ...]  # shuffled surnames; rounds slice it in order
    cursor: int = 0
    completed_rounds: int = 0
    valid_rounds: int = 0  # responses surviving the per-record rules so far
    used_chains: set = field(default_factory=set)
    pending: dict = field(default_factory=dict)  # round_index -> _Pending

    def snapshot(self) -> SessionState:
        return SessionState(
            self.session_id,
            self.story,
            self.sequence_id,
            self.completed_rounds,
            self.completed_rounds >= ROUNDS_PER_SESSION,
        )


def _shown_statements(pg: PartialGraph, labels, story: str) -> tuple[str, ...]:
    present_text, absent_text = RELATION_TEXT[story]
    pairs = slot_pairs(pg.n)
    out = []
    for s in range(pair_count(pg.n)):
        if pg.obscured >> s & 1:
            continue
        i, j = pairs[s]
        text = present_text if pg.edges >> s & 1 else absent_text
        out.append(text.format(a=labels[i], b=labels[j]))
    return tuple(out)


class ChainService:
    """Single-process experiment backend with an append-only event log.

    All mutations hold one lock (the HTTP layer may call from many threads);
    chain updates are serialized by construction.  `clock` is injectable so
    lease expiry is testable.
    """

    def __init__(self, log_path, seed: int = 0, clock=time.time):
        self._lock = threading.RLock()
        self._clock = clock
        self._log_path = str(log_path)
        self._rng = np.random.default_rng(np.random.SeedSequence((seed, 0x5EE7)))
        self._sessions: dict[str, _Session] = {}
        self._chains: dict[str, _Chain] = {}
        self._density_cursor: dict[tuple[str, int, int], int] = {}
        self._session_counter = 0
        self._records: list[ResponseRecord] = []
        if os.path.exists(self._log_path) and os.path.getsize(self._log_path):
            self._replay()
        self._log_fh = open(self._log_path, "a", encoding="utf-8")

    def close(self) -> None:
        with self._lock:
            self._log_fh.close()

    # ------------------------------------------------------------------
    # operations

    def create_session(self, story: str) -> SessionState:
        if story not in STORIES:
            raise DataError(f"unknown story {story!r}; expected one of {STORIES}")
        with self._lock:
            self._session_counter += 1
            sid = f"s{self._session_counter:05d}"
            sequence_id = int(self._rng.integers(1, len(ROUND_SEQUENCES) + 1))
            pool = tuple(str(x) for x in self._rng.permutation(SURNAMES))
            sess = _Session(sid, story, sequence_id, pool)
            self._sessions[sid] = sess
            self._append(
                {
                    "event": "session",
                    "session_id": sid,
                    "story": story,
                    "sequence_id": sequence_id,
                    "pool": list(pool),
                    "time": self._clock(),
                }
            )
            return sess.snapshot()

    def session_state(self, session_id: str) -> SessionState:
        with self._lock:
            return self._session(session_id).snapshot()

    def next_round(self, session_id: str) -> RoundAssignment:
        with self._lock:
            sess = self._session(session_id)
            if sess.completed_rounds >= ROUNDS_PER_SESSION:
                raise ProtocolError("session already completed")
            k = sess.completed_rounds + 1
            now = self._clock()
            pending = sess.pending.get(k)
            if pending is not None and not pending.answered and now <= pending.expires_at:
                return self._assignment(sess, pending)  # idempotent retry
            if pending is not None and not pending.answered:
                self._release(pending.chain_id, sess.session_id, k)
                del sess.pending[k]
            n, s = ROUND_SEQUENCES[sess.sequence_id - 1][k - 1]
            chain = self._allocate(sess, n, s)
            m = pair_count(n)
            hide = self._rng.choice(m, size=m - s, replace=False)
            pg = PartialGraph.obscure(chain.current, [int(x) for x in hide])
            labels = self._labels_for(sess, n)
            pending = _Pending(k, chain.chain_id, pg, labels, now + LEASE_SECONDS)
            sess.pending[k] = pending
            sess.used_chains.add(chain.chain_id)
            chain.leased_to = (sess.session_id, k)
            chain.leased_until = pending.expires_at
            self._append(
                {
                    "event": "assignment",
                    "session_id": sess.session_id,
                    "round_index": k,
                    "chain_id": chain.chain_id,
                    "pg": partial_graph_to_json(pg),
                    "labels": list(labels),
                    "time": now,
                }
            )
            return self._assignment(sess, pending)

    def submit_response(
        self,
        session_id: str,
        round_index: int,
        edges,
        elapsed_seconds: float,
        nodes_moved: int,
    ) -> Verdict:
        with self._lock:
            sess = self._session(session_id)
            pending = sess.pending.get(round_index)
            if pending is None or pending.answered:
                raise ProtocolError(f"round {round_index} has no open assignment")
            now = self._clock()
            if now > pending.expires_at:
                self._release(pending.chain_id, session_id, round_index)
                del sess.pending[round_index]
                raise ProtocolError(f"round {round_index} lease expired; request it again")
            chain = self._chains[pending.chain_id]
            try:
                elapsed_seconds = float(elapsed_seconds)
                nodes_moved = int(nodes_moved)
                response = Graph.from_edges(chain.n, [(int(i), int(j)) for i, j in edges])
            except (TypeError, ValueError) as exc:
                raise DataError(f"malformed submission: {exc}") from exc

            if not pending.pg.is_completion(response):
                offending = self._offending(pending.pg, response)
                self._append(
                    {
                        "event": "rejected_response",
                        "session_id": session_id,
                        "round_index": round_index,
                        "chain_id": chain.chain_id,
                        "edges": [list(e) for e in response.edges()],
                        "elapsed_seconds": elapsed_seconds,
                        "nodes_moved": nodes_moved,
                        "offending": [list(p) for p in offending],
                        "time": now,
                    }
                )
                return Verdict("rejected", offending=offending)

            record = ResponseRecord(
                session_id=session_id,
                story=sess.story,
                chain_id=chain.chain_id,
                round_index=chain.length + 1,
                n=chain.n,
                pg=pending.pg,
                response=response,
                elapsed_seconds=elapsed_seconds,
                nodes_moved=nodes_moved,
            )
            rules = tuple(record_rule_violations(record))
            accepted = not rules
            if accepted:
                chain.current = response
                chain.length += 1
                sess.valid_rounds += 1
            self._release(chain.chain_id, session_id, round_index)
            pending.answered = True
            variant = (round_index - 1) % len(QUESTION_VARIANTS)
            kind, prompt = QUESTION_VARIANTS[variant]
            pending.question = {
                "variant": variant,
                "kind": kind,
                "prompt": prompt,
                "labels": list(pending.labels),
            }
            sess.completed_rounds = round_index
            self._records.append(record)
            self._append(
                {
                    "event": "response",
                    "record": record.to_json(),
                    "verdict": "accepted" if accepted else "excluded",
                    "rules": list(rules),
                    "session_round": round_index,
                    "valid_rounds_in_session": sess.valid_rounds,
                    "time": now,
                },
                sync=accepted,
            )
            return Verdict(
                "accepted" if accepted else "excluded",
                rules=rules,
                question=pending.question,
                score=10 * chain.n,
                session_completed=sess.completed_rounds >= ROUNDS_PER_SESSION,
            )

    def record_answer(self, session_id: str, round_index: int, nodes) -> None:
        with self._lock:
            sess = self._session(session_id)
            pending = sess.pending.get(round_index)
            if pending is None or not pending.answered or pending.question is None:
                raise ProtocolError(f"round {round_index} has no question to answer")
            n = len(pending.labels)
            try:
                nodes = [int(x) for x in nodes]
            except (TypeError, ValueError) as exc:
                raise DataError(f"malformed answer: {exc}") from exc
            if any(not 0 <= x < n for x in nodes):
                raise DataError(f"answer nodes must be in [0, {n})")
            self._append(
                {
                    "event": "answer",
                    "session_id": session_id,
                    "round_index": round_index,
                    "nodes": nodes,
                    "time": self._clock(),
                }
            )

    def export_records(self, story: str | None = None, n: int | None = None):
        """Loggable responses (accepted and excluded, never rejected)."""
        with self._lock:
            return [
                r
                for r in self._records
                if (story is None or r.story == story) and (n is None or r.n == n)
            ]

    def chain_states(self) -> list[ChainState]:
        with self._lock:
            return [c.snapshot() for c in self._chains.values()]

    # ------------------------------------------------------------------
    # internals

    def _session(self, session_id: str) -> _Session:
        sess = self._sessions.get(session_id)
        if sess is None:
            raise KeyError(f"unknown session {session_id!r}")
        return sess

    def _assignment(self, sess: _Session, pending: _Pending) -> RoundAssignment:
        return RoundAssignment(
            session_id=sess.session_id,
            round_index=pending.round_index,
            chain_id=pending.chain_id,
            pg=pending.pg,
            shown_list=_shown_statements(pending.pg, pending.labels, sess.story),
            labels=pending.labels,
            large_n=self._chains[pending.chain_id].n >= LARGE_N_THRESHOLD,
        )

    def _labels_for(self, sess: _Session, n: int) -> tuple[str, ...]:
        # one pass through the pool covers a whole session (134 labels);
        # wrap only under pathological reassignment storms
        out = tuple(sess.pool[(sess.cursor + i) % len(sess.pool)] for i in range(n))
        sess.cursor += n
        return out

    def _leased(self, chain: _Chain) -> bool:
        return chain.leased_to is not None and self._clock() <= chain.leased_until

    def _release(self, chain_id: str, session_id: str, round_index: int) -> None:
        chain = self._chains.get(chain_id)
        if chain is not None and chain.leased_to == (session_id, round_index):
            chain.leased_to = None
            chain.leased_until = 0.0

    def _allocate(self, sess: _Session, n: int, s: int) -> _Chain:
        open_chains = [
            c
            for c in self._chains.values()
            if c.story == sess.story
            and c.n == n
            and c.s == s
            and c.length < CHAIN_TARGET
            and c.chain_id not in sess.used_chains
            and not self._leased(c)
        ]
        if open_chains:
            return min(open_chains, key=lambda c: (c.length, c.chain_id))
        return self._init_chain(sess.story, n, s)

    def _init_chain(self, story: str, n: int, s: int) -> _Chain:
        key = (story, n, s)
        idx = self._density_cursor.get(key, 0)
        self._density_cursor[key] = idx + 1
        rho = DENSITY_CYCLE[idx % len(DENSITY_CYCLE)]
        m = pair_count(n)
        bits = 0
        draws = self._rng.random(m)
        for slot in range(m):
            if draws[slot] < rho:
                bits |= 1 << slot
        chain = _Chain(f"{story}-n{n}-s{s}-{idx:04d}", story, n, s, Graph(n, bits))
        self._chains[chain.chain_id] = chain
        self._append(
            {
                "event": "chain",
                "chain_id": chain.chain_id,
                "story": story,
                "n": n,
                "s": s,
                "rho": rho,
                "bits": bits,
                "time": self._clock(),
            }
        )
        return chain

    @staticmethod
    def _offending(pg: PartialGraph, response: Graph) -> tuple[tuple[int, int], ...]:
        pairs = slot_pairs(pg.n)
        bad = []
        for slot in range(pair_count(pg.n)):
            if pg.obscured >> slot & 1:
                continue
            if (response.bits >> slot & 1) != (pg.edges >> slot & 1):
                bad.append(pairs[slot])
        return tuple(bad)

    def _append(self, obj: dict, sync: bool = False) -> None:
        self._log_fh.write(json.dumps(obj, sort_keys=True) + "\n")
        self._log_fh.flush()
        if sync:
            os.fsync(self._log_fh.fileno())

    def _replay(self) -> None:
        """Rebuild all state from the event log (crash recovery)."""
        with open(self._log_path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    obj = json.loads(line)
                    self._apply_event(obj)
                except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                    raise DataError(f"corrupt event log at line {lineno}: {exc}") from exc

    def _apply_event(self, obj: dict) -> None:
        event = obj["event"]
        if event == "session":
            sid = obj["session_id"]
            self._sessions[sid] = _Session(
                sid, obj["story"], int(obj["sequence_id"]), tuple(obj["pool"])
            )
            self._session_counter = max(self._session_counter, int(sid.lstrip("s")))
        elif event == "chain":
            cid = obj["chain_id"]
            self._chains[cid] = _Chain(
                cid, obj["story"], int(obj["n"]), int(obj["s"]), Graph(int(obj["n"]), int(obj["bits"]))
            )
            key = (obj["story"], int(obj["n"]), int(obj["s"]))
            self._density_cursor[key] = self._density_cursor.get(key, 0) + 1
        elif event == "assignment":
            sess = self._sessions[obj["session_id"]]
            k = int(obj["round_index"])
            labels = tuple(obj["labels"])
            pending = _Pending(
                k,
                obj["chain_id"],
                partial_graph_from_json(obj["pg"]),
                labels,
                float(obj["time"]) + LEASE_SECONDS,
            )
            sess.pending[k] = pending
            sess.used_chains.add(obj["chain_id"])
            sess.cursor += len(labels)
            chain = self._chains[obj["chain_id"]]
            chain.leased_to = (sess.session_id, k)
            chain.leased_until = pending.expires_at
        elif event == "response":
            record = ResponseRecord.from_json(obj["record"])
            sess = self._sessions[record.session_id]
            k = int(obj["session_round"])
            chain = self._chains[record.chain_id]
            if obj["verdict"] == "accepted":
                chain.current = record.response
                chain.length += 1
                sess.valid_rounds += 1
            self._release(chain.chain_id, record.session_id, k)
            pending = sess.pending.get(k)
            if pending is not None:
                pending.answered = True
                variant = (k - 1) % len(QUESTION_VARIANTS)
                kind, prompt = QUESTION_VARIANTS[variant]
                pending.question = {
                    "variant": variant,
                    "kind": kind,
                    "prompt": prompt,
                    "labels": list(pending.labels),
                }
            sess.completed_rounds = k
            self._records.append(record)
        elif event in ("rejected_response", "answer"):
            pass  # no structural effect
        else:
            raise DataError(f"unknown event kind {event!r}")


def export_jsonl(records) -> str:
    return "".join(json.dumps(r.to_json(), sort_keys=True) + "\n" for r in records)


def create_app(service: ChainService):
    """HTTP layer over a ChainService."""
    from fastapi import Body, FastAPI, Request
    from fastapi.middleware.cors import CORSMiddleware
    from fastapi.responses import JSONResponse, PlainTextResponse

    app = FastAPI(title="graph prior chain service")
    # the participant UI is static-hosted on a different origin
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["GET", "POST"], allow_headers=["*"]
    )

    @app.exception_handler(DataError)
    async def _data_error(request: Request, exc: DataError):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.exception_handler(ProtocolError)
    async def _protocol_error(request: Request, exc: ProtocolError):
        return JSONResponse(status_code=409, content={"error": str(exc)})

    @app.exception_handler(KeyError)
    async def _not_found(request: Request, exc: KeyError):
        return JSONResponse(status_code=404, content={"error": str(exc)})

    @app.post("/sessions")
    def create_session(payload: dict = Body(...)):
        return service.create_session(payload.get("story", "")).to_json()

    @app.get("/sessions/{session_id}")
    def session_state(session_id: str):
        return service.session_state(session_id).to_json()

    @app.get("/sessions/{session_id}/round")
    def next_round(session_id: str):
        return service.next_round(session_id).to_json()

    @app.post("/sessions/{session_id}/rounds/{round_index}")
    def submit(session_id: str, round_index: int, payload: dict = Body(...)):
        telemetry = payload.get("telemetry") or {}
        if "elapsed_seconds" not in telemetry or "nodes_moved" not in telemetry:
            raise DataError("telemetry must include elapsed_seconds and nodes_moved")
        return service.submit_response(
            session_id,
            round_index,
            payload.get("edges", []),
            telemetry["elapsed_seconds"],
            telemetry["nodes_moved"],
        ).to_json()

    @app.post("/sessions/{session_id}/rounds/{round_index}/question-answer")
    def question_answer(session_id: str, round_index: int, payload: dict = Body(...)):
        service.record_answer(session_id, round_index, payload.get("nodes", []))
        return {"ok": True}

    @app.get("/export")
    def export(story: str | None = None, n: int | None = None):
        return PlainTextResponse(export_jsonl(service.export_records(story, n)))

    return app
