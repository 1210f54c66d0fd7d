"""Chain service: sessions, allocation, leases, verdicts, replay, HTTP."""

import json

import pytest

from graphprior.errors import DataError, ProtocolError
from graphprior.graphs import Graph, pair_count, slot_pairs
from graphprior.pipeline import aggregate, apply_exclusions, load_records
from graphprior.service import (
    CHAIN_TARGET,
    DENSITY_CYCLE,
    LEASE_SECONDS,
    QUESTION_VARIANTS,
    ROUND_SEQUENCES,
    ROUNDS_PER_SESSION,
    ChainService,
    create_app,
    export_jsonl,
)


class FakeClock:
    def __init__(self, t=1_000_000.0):
        self.t = t

    def __call__(self):
        return self.t

    def advance(self, dt):
        self.t += dt


@pytest.fixture
def clock():
    return FakeClock()


@pytest.fixture
def service(tmp_path, clock):
    svc = ChainService(tmp_path / "events.jsonl", seed=0, clock=clock)
    yield svc
    svc.close()


def compliant_submission(assignment):
    """Response filling every obscured slot; telemetry passing rules 1-3."""
    pg = assignment.pg
    g = Graph(pg.n, pg.edges | pg.obscured)
    return {
        "edges": [list(e) for e in g.edges()],
        "elapsed": 3.0 * pg.shown_count + 5.0,
        "moved": pg.n,
    }


def play_round(service, session_id):
    a = service.next_round(session_id)
    sub = compliant_submission(a)
    v = service.submit_response(
        session_id, a.round_index, sub["edges"], sub["elapsed"], sub["moved"]
    )
    return a, v


def test_create_session(service):
    state = service.create_session("park")
    assert state.session_id == "s00001"
    assert state.story == "park"
    assert 1 <= state.sequence_id <= len(ROUND_SEQUENCES)
    assert state.next_round == 0
    assert not state.completed
    with pytest.raises(DataError):
        service.create_session("casino")
    with pytest.raises(KeyError):
        service.session_state("s99999")


def test_full_session_lifecycle(service):
    sid = service.create_session("class").session_id
    seq = ROUND_SEQUENCES[service.session_state(sid).sequence_id - 1]
    for k in range(1, ROUNDS_PER_SESSION + 1):
        a, v = play_round(service, sid)
        n, s = seq[k - 1]
        assert a.round_index == k
        assert a.pg.n == n
        assert a.pg.shown_count == s
        assert len(a.shown_list) == s
        assert len(a.labels) == n
        assert len(set(a.labels)) == n
        assert a.large_n == (n >= 10)
        assert v.verdict == "accepted"
        assert v.score == 10 * n
        assert v.question["variant"] == (k - 1) % len(QUESTION_VARIANTS)
        assert v.session_completed == (k == ROUNDS_PER_SESSION)
    assert service.session_state(sid).completed
    with pytest.raises(ProtocolError):
        service.next_round(sid)
    records = service.export_records()
    assert len(records) == ROUNDS_PER_SESSION
    # one fresh chain per round: every accepted response is that chain's first
    assert all(r.round_index == 1 for r in records)
    assert len({r.chain_id for r in records}) == ROUNDS_PER_SESSION


def test_assignment_idempotent_until_answered(service):
    sid = service.create_session("work").session_id
    a1 = service.next_round(sid)
    a2 = service.next_round(sid)
    assert a1.chain_id == a2.chain_id
    assert a1.pg == a2.pg
    assert a1.labels == a2.labels


def test_rejected_response_keeps_round_open(service):
    sid = service.create_session("city").session_id
    a = service.next_round(sid)
    pg = a.pg
    # flip one shown slot so the response contradicts the stimulus
    shown = [t for t in range(pair_count(pg.n)) if not pg.obscured >> t & 1]
    bad_bits = (pg.edges | pg.obscured) ^ (1 << shown[0])
    bad = Graph(pg.n, bad_bits)
    v = service.submit_response(
        sid, a.round_index, [list(e) for e in bad.edges()], 1000.0, pg.n
    )
    assert v.verdict == "rejected"
    assert v.offending == (slot_pairs(pg.n)[shown[0]],)
    assert service.export_records() == []  # never enters the dataset
    # the round is still pending with the same stimulus
    again = service.next_round(sid)
    assert again.round_index == a.round_index
    assert again.pg == a.pg
    sub = compliant_submission(again)
    v2 = service.submit_response(sid, a.round_index, sub["edges"], sub["elapsed"], sub["moved"])
    assert v2.verdict == "accepted"
    assert len(service.export_records()) == 1


def test_excluded_response_consumes_round_without_advancing_chain(service):
    sid = service.create_session("class").session_id
    a = service.next_round(sid)
    sub = compliant_submission(a)
    v = service.submit_response(sid, a.round_index, sub["edges"], 0.5, sub["moved"])
    assert v.verdict == "excluded"
    assert "too_fast" in v.rules
    chain = next(c for c in service.chain_states() if c.chain_id == a.chain_id)
    assert chain.length == 0
    assert service.next_round(sid).round_index == a.round_index + 1
    # excluded rounds still export; offline rules drop them later
    recs = service.export_records()
    assert len(recs) == 1
    assert recs[0].round_index == 1


def test_submission_protocol_errors(service):
    sid = service.create_session("park").session_id
    with pytest.raises(ProtocolError):
        service.submit_response(sid, 1, [], 100.0, 4)
    a = service.next_round(sid)
    with pytest.raises(ProtocolError):
        service.submit_response(sid, a.round_index + 1, [], 100.0, 4)
    with pytest.raises(DataError):
        service.submit_response(sid, a.round_index, [["x", 0]], 100.0, 4)
    sub = compliant_submission(a)
    service.submit_response(sid, a.round_index, sub["edges"], sub["elapsed"], sub["moved"])
    with pytest.raises(ProtocolError):
        service.submit_response(sid, a.round_index, sub["edges"], sub["elapsed"], sub["moved"])
    with pytest.raises(KeyError):
        service.next_round("s00042")


def test_question_answer_flow(service):
    sid = service.create_session("work").session_id
    a = service.next_round(sid)
    with pytest.raises(ProtocolError):
        service.record_answer(sid, a.round_index, [0])
    sub = compliant_submission(a)
    v = service.submit_response(sid, a.round_index, sub["edges"], sub["elapsed"], sub["moved"])
    assert v.question["labels"] == list(a.labels)
    service.record_answer(sid, a.round_index, [0, 2])
    with pytest.raises(DataError):
        service.record_answer(sid, a.round_index, [a.pg.n])
    with pytest.raises(DataError):
        service.record_answer(sid, a.round_index, ["abc"])


def test_lease_expiry_reassigns_and_blocks_late_submission(service, clock):
    sid = service.create_session("city").session_id
    a1 = service.next_round(sid)
    clock.advance(LEASE_SECONDS + 1.0)
    sub = compliant_submission(a1)
    with pytest.raises(ProtocolError):
        service.submit_response(sid, a1.round_index, sub["edges"], sub["elapsed"], sub["moved"])
    a2 = service.next_round(sid)
    assert a2.round_index == a1.round_index
    # the first chain was marked used at assignment, so the retry gets a new one
    assert a2.chain_id != a1.chain_id
    sub = compliant_submission(a2)
    v = service.submit_response(sid, a2.round_index, sub["edges"], sub["elapsed"], sub["moved"])
    assert v.verdict == "accepted"


def test_expired_assignment_refreshes_on_next_round(service, clock):
    sid = service.create_session("class").session_id
    a1 = service.next_round(sid)
    clock.advance(LEASE_SECONDS + 1.0)
    a2 = service.next_round(sid)
    assert a2.round_index == a1.round_index
    assert a2.chain_id != a1.chain_id


def test_shown_list_phrasing_matches_stimulus(service):
    sid = service.create_session("city").session_id
    a = service.next_round(sid)
    pg = a.pg
    pairs = slot_pairs(pg.n)
    present, absent = 0, 0
    for t in range(pair_count(pg.n)):
        if pg.obscured >> t & 1:
            continue
        i, j = pairs[t]
        if pg.edges >> t & 1:
            present += 1
            assert f"{a.labels[i]} and {a.labels[j]} share a border." in a.shown_list
        else:
            absent += 1
    assert sum("do not share" in s for s in a.shown_list) == absent
    assert sum("share a border." in s and "do not" not in s for s in a.shown_list) == present


def _sessions_sharing_sequence(service, story, want):
    """Create sessions until `want` of them share one sequence id."""
    groups = {}
    for _ in range(6 * (want - 1) + 1):
        st = service.create_session(story)
        groups.setdefault(st.sequence_id, []).append(st.session_id)
        if len(groups[st.sequence_id]) >= want:
            return groups[st.sequence_id]
    raise AssertionError("unreachable by pigeonhole")


def test_chain_sharing_least_full_and_capacity(service, tmp_path):
    sids = _sessions_sharing_sequence(service, "park", CHAIN_TARGET + 2)
    chain_ids = []
    for sid in sids[:CHAIN_TARGET]:
        a, v = play_round(service, sid)
        assert v.verdict == "accepted"
        chain_ids.append(a.chain_id)
    # every session extends the same chain: it stays the least-full open one
    assert len(set(chain_ids)) == 1
    full = next(c for c in service.chain_states() if c.chain_id == chain_ids[0])
    assert full.length == CHAIN_TARGET
    assert full.status == "full"
    # the next session cannot touch the full chain
    a, v = play_round(service, sids[CHAIN_TARGET])
    assert a.chain_id != chain_ids[0]
    # successive responses walked the chain: exported round indices are 1..12
    rounds = [r.round_index for r in service.export_records() if r.chain_id == chain_ids[0]]
    assert rounds == list(range(1, CHAIN_TARGET + 1))


def test_leased_chains_are_skipped_and_densities_cycle(service, tmp_path):
    want = len(DENSITY_CYCLE) + 2
    sids = _sessions_sharing_sequence(service, "work", want)
    assignments = [service.next_round(sid) for sid in sids]
    # all leases open simultaneously: every session got a fresh chain
    assert len({a.chain_id for a in assignments}) == want
    n, s = assignments[0].pg.n, assignments[0].pg.shown_count
    rhos = []
    with open(service._log_path) as fh:
        for line in fh:
            obj = json.loads(line)
            if obj.get("event") == "chain" and obj["story"] == "work" and obj["n"] == n:
                rhos.append(obj["rho"])
    assert rhos[: len(DENSITY_CYCLE)] == list(DENSITY_CYCLE)
    assert rhos[len(DENSITY_CYCLE) :] == list(DENSITY_CYCLE[: want - len(DENSITY_CYCLE)])


def test_session_never_reuses_a_chain(service):
    # sequences 3 and 4 repeat (15, 10); any session must still use 16
    # distinct chains
    for _ in range(12):
        sid = service.create_session("class").session_id
        seq_id = service.session_state(sid).sequence_id
        chains = [play_round(service, sid)[0].chain_id for _ in range(ROUNDS_PER_SESSION)]
        assert len(set(chains)) == ROUNDS_PER_SESSION
        if seq_id in (3, 4):
            break
    else:
        pytest.skip("seed never drew sequence 3 or 4")


def test_export_filters_and_round_trip(service, tmp_path):
    sid_a = service.create_session("class").session_id
    sid_b = service.create_session("city").session_id
    for _ in range(4):
        play_round(service, sid_a)
        play_round(service, sid_b)
    assert {r.story for r in service.export_records(story="class")} == {"class"}
    ns = {r.n for r in service.export_records(n=4)}
    assert ns <= {4}
    out = tmp_path / "export.jsonl"
    out.write_text(export_jsonl(service.export_records()))
    loaded = load_records(out)
    assert [r.to_json() for r in loaded] == [r.to_json() for r in service.export_records()]
    # the raw event log parses to the identical records
    from_log = load_records(service._log_path)
    assert [r.to_json() for r in from_log] == [r.to_json() for r in loaded]


def test_exported_sessions_survive_offline_rules(service):
    sid = service.create_session("class").session_id
    for _ in range(ROUNDS_PER_SESSION):
        play_round(service, sid)
    kept, report = apply_exclusions(service.export_records())
    assert report.kept == ROUNDS_PER_SESSION
    n0 = kept[0].n
    data = aggregate(kept, "class", n0)
    assert all(item.pg.n == n0 for item in data.records)


def test_replay_rebuilds_state(tmp_path, clock):
    path = tmp_path / "events.jsonl"
    svc = ChainService(path, seed=3, clock=clock)
    sid = svc.create_session("park").session_id
    for _ in range(3):
        play_round(svc, sid)
    # one rejected submission and one in-flight assignment survive the crash
    a = svc.next_round(sid)
    pg = a.pg
    shown = [t for t in range(pair_count(pg.n)) if not pg.obscured >> t & 1]
    bad = Graph(pg.n, (pg.edges | pg.obscured) ^ (1 << shown[0]))
    svc.submit_response(sid, a.round_index, [list(e) for e in bad.edges()], 999.0, pg.n)
    before_chains = sorted((c.to_json() for c in svc.chain_states()), key=lambda c: c["chain_id"])
    before_records = [r.to_json() for r in svc.export_records()]
    svc.close()

    svc2 = ChainService(path, seed=3, clock=clock)
    after_chains = sorted((c.to_json() for c in svc2.chain_states()), key=lambda c: c["chain_id"])
    assert after_chains == before_chains
    assert [r.to_json() for r in svc2.export_records()] == before_records
    state = svc2.session_state(sid)
    assert state.next_round == 3
    # the pending round came back with the identical stimulus and chain
    a2 = svc2.next_round(sid)
    assert a2.round_index == a.round_index
    assert a2.chain_id == a.chain_id
    assert a2.pg == a.pg
    assert a2.labels == a.labels
    sub = compliant_submission(a2)
    v = svc2.submit_response(sid, a2.round_index, sub["edges"], sub["elapsed"], sub["moved"])
    assert v.verdict == "accepted"
    svc2.close()


def test_replay_rejects_corrupt_log(tmp_path, clock):
    path = tmp_path / "events.jsonl"
    path.write_text('{"event": "warp"}\n')
    with pytest.raises(DataError):
        ChainService(path, clock=clock)


def test_log_tracks_session_progress(service):
    sid = service.create_session("work").session_id
    play_round(service, sid)
    a = service.next_round(sid)
    sub = compliant_submission(a)
    service.submit_response(sid, a.round_index, sub["edges"], 0.1, sub["moved"])  # excluded
    with open(service._log_path) as fh:
        events = [json.loads(line) for line in fh]
    responses = [e for e in events if e["event"] == "response"]
    assert [e["session_round"] for e in responses] == [1, 2]
    assert [e["valid_rounds_in_session"] for e in responses] == [1, 1]
    assert [e["verdict"] for e in responses] == ["accepted", "excluded"]


def test_http_layer(tmp_path, clock):
    from fastapi.testclient import TestClient

    svc = ChainService(tmp_path / "events.jsonl", seed=1, clock=clock)
    client = TestClient(create_app(svc))

    assert client.post("/sessions", json={"story": "casino"}).status_code == 400
    assert client.get("/sessions/s00009").status_code == 404

    sid = client.post("/sessions", json={"story": "city"}).json()["session_id"]
    a = client.get(f"/sessions/{sid}/round").json()
    assert a["round_index"] == 1
    assert len(a["labels"]) == a["pg"]["n"]

    r = client.post(f"/sessions/{sid}/rounds/1", json={"edges": []})
    assert r.status_code == 400  # telemetry required

    pg = a["pg"]
    nverts = pg["n"]
    edges = pg["edges"] + pg["obscured"]
    payload = {
        "edges": edges,
        "telemetry": {"elapsed_seconds": 3.0 * len(pg["absent"]) + 3.0 * len(pg["edges"]) + 5.0,
                      "nodes_moved": nverts},
    }
    v = client.post(f"/sessions/{sid}/rounds/1", json=payload).json()
    assert v["verdict"] == "accepted"
    assert v["question"]["variant"] == 0

    assert client.post(f"/sessions/{sid}/rounds/1", json=payload).status_code == 409
    ok = client.post(f"/sessions/{sid}/rounds/1/question-answer", json={"nodes": [0]})
    assert ok.json() == {"ok": True}
    assert (
        client.post(f"/sessions/{sid}/rounds/1/question-answer", json={"nodes": [99]}).status_code
        == 400
    )

    lines = client.get("/export").text.strip().splitlines()
    assert len(lines) == 1
    rec = json.loads(lines[0])
    assert rec["session_id"] == sid
    assert client.get("/export", params={"story": "park"}).text.strip() == ""
    svc.close()
