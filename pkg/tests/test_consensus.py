import hashlib
from collections import deque

import pytest
from hypothesis import given, settings, strategies as st

from settlesim.consensus import (ConsensusMessage, MsgKind, Replica, default_validators, max_faulty,
                                 quorum_threshold, sign)
from settlesim.errors import DuplicateProposal, EmptyBatch, NotLeader, ZeroValidators


def cluster(n):
    vals = default_validators(n)
    return [Replica(i, vals) for i in range(n)]


def D(x):
    return hashlib.sha256(str(x).encode()).digest()


def broadcast(replicas, msgs, alive=None, drop=lambda m, dst: False):
    """Deliver everything until quiet. Returns {replica index: [committed digests]}."""
    alive = set(range(len(replicas))) if alive is None else alive
    # a leader processes its own PrePrepare like everyone else
    queue = deque((m, dst) for m in msgs for dst in alive
                  if dst != m.sender or m.kind is MsgKind.PRE_PREPARE)
    commits = {i: [] for i in alive}
    while queue:
        msg, dst = queue.popleft()
        if drop(msg, dst):
            continue
        out, committed = replicas[dst].handle_message(msg)
        if committed:
            commits[dst].append(committed)
        for m in out:
            queue.extend((m, d) for d in alive if d != dst)
    return commits


@pytest.mark.parametrize("n,q", [(1, 1), (4, 3), (5, 4), (7, 5), (10, 7)])
def test_quorum_threshold(n, q):
    assert quorum_threshold(n) == q


def test_quorum_rejects_zero():
    with pytest.raises(ZeroValidators):
        quorum_threshold(0)


def test_quorum_intersection_bound():
    for n in range(1, 101):
        q, f = quorum_threshold(n), max_faulty(n)
        assert q > 2 * f
        # any two quorums overlap in at least f+1 validators
        assert 2 * q - n >= f + 1


def test_leader_rule_and_duplicates():
    r = cluster(4)
    r[0].propose(D(1), [1])
    with pytest.raises(NotLeader):
        r[1].propose(D(1), [1])
    with pytest.raises(DuplicateProposal):
        r[0].propose(D(2), [1])
    with pytest.raises(EmptyBatch):
        cluster(4)[0].propose(D(1), [])


def test_preprepare_yields_prepare():
    r = cluster(4)
    pp = r[0].propose(D(1), [1])
    out, committed = r[1].handle_message(pp)
    assert [m.kind for m in out] == [MsgKind.PREPARE] and committed is None
    assert out[0].sender == 1 and out[0].block_digest == D(1)


def test_three_prepares_yield_commit():
    r = cluster(4)
    pp = r[0].propose(D(1), [1])
    r[1].handle_message(pp)
    prepares = [r[i].handle_message(pp)[0][0] for i in (2, 3)]
    out = []
    for p in prepares:
        out += r[1].handle_message(p)[0]
    # own prepare plus two peers = 3 = quorum(4)
    assert [m.kind for m in out] == [MsgKind.COMMIT]


def test_message_for_other_view_is_noop():
    r = cluster(4)
    before = r[1].snapshot()
    msg = sign(ConsensusMessage(MsgKind.PREPARE, 7, 1, D(1), 2), r[2].key)
    assert r[1].handle_message(msg) == ([], None)
    assert r[1].snapshot() == before


def test_forged_tag_dropped():
    r = cluster(4)
    forged = sign(ConsensusMessage(MsgKind.PRE_PREPARE, 0, 1, D(1), 0), b"not-the-key")
    assert r[1].handle_message(forged) == ([], None) and r[1].dropped == 1


def test_normal_case_commit_all_replicas():
    r = cluster(4)
    commits = broadcast(r, [r[0].propose(D(1), [1])])
    assert all(c == [D(1)] for c in commits.values())
    assert all(x.is_final(1) and not x.is_final(2) for x in r)


def test_single_validator_commits_alone():
    (r,) = cluster(1)
    commits = broadcast([r], [r.propose(D(3), [1])])
    assert commits == {0: [D(3)]} and r.is_final(1)


def test_timeout_noop_before_deadline():
    r = cluster(4)[1]
    r.arm(0, 100)
    assert r.on_timeout(99) is None
    assert r.on_timeout(100).kind is MsgKind.VIEW_CHANGE


def test_crashed_leader_view_change():
    r = cluster(4)
    alive = {1, 2, 3}
    vcs = []
    for i in alive:
        r[i].arm(0, 10)
        vcs.append(r[i].on_timeout(10))
    broadcast(r, vcs, alive)
    assert all(r[i].view == 1 for i in alive)
    commits = broadcast(r, [r[1].propose(D(5), [1])], alive)
    assert all(commits[i] == [D(5)] for i in alive)


def test_two_crashed_leaders_view_two():
    r = cluster(7)
    alive = set(range(2, 7))
    for target in (1, 2):
        vcs = []
        for i in alive:
            r[i].arm(0, 10)
            vcs.append(r[i].on_timeout(10))
        broadcast(r, vcs, alive)
    assert all(r[i].view == 2 for i in alive)
    commits = broadcast(r, [r[2].propose(D(9), [1])], alive)
    assert all(commits[i] == [D(9)] for i in alive)


def test_prepared_value_survives_view_change():
    r = cluster(4)
    pp = r[0].propose(D(1), [1])
    # commits never reach anyone: every replica prepares D(1) but cannot commit
    broadcast(r, [pp], drop=lambda m, dst: m.kind is MsgKind.COMMIT)
    assert not any(x.is_final(1) for x in r)
    alive = {1, 2, 3}
    vcs = []
    for i in alive:
        r[i].arm(0, 1)
        vcs.append(r[i].on_timeout(1))
    broadcast(r, vcs, alive)
    assert r[1].view == 1 and r[1].reproposal() == D(1)


def test_equivocation_cannot_split_honest_replicas():
    r = cluster(4)
    a = r[0].propose(D("a"), [1])
    r[0].own_proposals.clear()
    b = r[0].propose(D("b"), [1])
    # v1 hears a, v2 and v3 hear b; the byzantine leader votes for both
    q = deque([(a, 1), (b, 2), (b, 3)])
    committed = {}
    while q:
        msg, dst = q.popleft()
        out, c = r[dst].handle_message(msg)
        if c:
            committed[dst] = c
        for m in out:
            q.extend((m, d) for d in (1, 2, 3) if d != dst)
    for d in (D("a"), D("b")):
        for kind in (MsgKind.PREPARE, MsgKind.COMMIT):
            vote = sign(ConsensusMessage(kind, 0, 1, d, 0), r[0].key)
            for dst in (1, 2, 3):
                r[dst].handle_message(vote)
                if r[dst].is_final(1):
                    committed[dst] = r[dst].commit_log[1]
    assert len(set(committed.values())) <= 1


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32), st.sampled_from([4, 7]))
def test_random_delivery_order_agrees(seed, n):
    import random
    rnd = random.Random(seed)
    r = cluster(n)
    pending = [(m, d) for m in [r[0].propose(D(seed), [1])] for d in range(1, n)]
    while pending:
        msg, dst = pending.pop(rnd.randrange(len(pending)))
        out, _ = r[dst].handle_message(msg)
        pending += [(m, d) for m in out for d in range(n) if d != dst]
    assert {x.commit_log.get(1) for x in r} == {D(seed)}


def test_commit_certificate_transfer():
    r = cluster(4)
    broadcast(r, [r[0].propose(D(1), [1])], alive={0, 1, 2})
    lagging = r[3]
    cert = r[1].commit_certs[1]
    assert lagging.accept_certificate(1, D(1), cert)
    assert lagging.is_final(1)
    assert not cluster(4)[3].accept_certificate(1, D(2), cert)
