"""Mediation points: origin resolution, counting, and plane separation."""

import random

import pytest

from helpers import random_policy, random_request
from oamac.kernel import DeadProcessError, Origin, SessionEntry, SessionKind, TerminalAssociation, boot
from oamac.mediation import (
    FILE_POINT,
    IFACE_REGISTRY,
    MediationError,
    mediate_file,
    mediate_iface,
    render_decision,
)
from oamac.paths import PathError
from oamac.policy import (
    AccessRequest,
    Action,
    AuditCounters,
    Decision,
    Mode,
    PolicyStore,
    Reason,
    default_policy,
    evaluate,
)


@pytest.fixture
def world():
    table = boot()
    table.mark_ready()
    store = PolicyStore(default_policy())
    counters = AuditCounters()
    return table, store, counters


def remote_pid(table):
    return table.session_entry(
        SessionEntry(SessionKind.REMOTE_LOGIN, TerminalAssociation.pty("pts0", SessionKind.REMOTE_LOGIN))
    )


def test_file_mediation_denies_and_counts(world):
    table, store, counters = world
    pid = remote_pid(table)
    decision = mediate_file(table, store, counters, pid, "/sys/devices", Mode.WRITE)
    assert not decision.allowed
    assert decision.matched_rule == 1
    assert counters.count(FILE_POINT, Origin.REMOTE, Action.DENY) == 1
    assert counters.count(FILE_POINT, Origin.REMOTE, Action.ALLOW) == 0


def test_paths_normalize_before_matching(world):
    table, store, counters = world
    pid = remote_pid(table)
    decision = mediate_file(table, store, counters, pid, "/sys/../sys//kernel/", Mode.READ)
    assert decision.matched_rule == 1  # still inside /sys after cleanup
    allowed = mediate_file(table, store, counters, pid, "/sys/kernel/../kernel/btf", Mode.READ)
    assert allowed.allowed and allowed.matched_rule == 0


def test_iface_mediation_counts_under_its_own_name(world):
    table, store, counters = world
    pid = remote_pid(table)
    assert not mediate_iface(table, store, counters, pid, "bpf-prog-load").allowed
    assert mediate_iface(table, store, counters, pid, "perf-event-open").allowed
    assert counters.count("bpf-prog-load", Origin.REMOTE, Action.DENY) == 1
    assert counters.count("perf-event-open", Origin.REMOTE, Action.ALLOW) == 1
    assert counters.count(FILE_POINT, Origin.REMOTE, Action.DENY) == 0


def test_bootstrap_subject_is_always_allowed_and_counted():
    table = boot()  # pre-ready: pid 1 is the only subject
    store = PolicyStore(default_policy())
    counters = AuditCounters()
    decision = mediate_file(table, store, counters, 1, "/etc/oamac/policy", Mode.WRITE)
    assert decision.allowed and decision.reason is Reason.BOOTSTRAP_EXEMPT
    assert counters.count(FILE_POINT, Origin.BOOTSTRAP, Action.ALLOW) == 1


@pytest.mark.parametrize("bad", ["Bad", "a_b", "", "-x", "x-", "bpf prog"])
def test_bad_interface_names_rejected(world, bad):
    table, store, counters = world
    pid = remote_pid(table)
    with pytest.raises(MediationError):
        mediate_iface(table, store, counters, pid, bad)
    assert counters.total() == 0


def test_error_paths_leave_counters_untouched(world):
    table, store, counters = world
    pid = remote_pid(table)
    with pytest.raises(MediationError):
        mediate_file(table, store, counters, pid, "/etc", Mode.ANY)
    with pytest.raises(PathError):
        mediate_file(table, store, counters, pid, "etc/oamac", Mode.READ)
    table.exit(pid)
    with pytest.raises(DeadProcessError):
        mediate_file(table, store, counters, pid, "/etc", Mode.READ)
    with pytest.raises(DeadProcessError):
        mediate_iface(table, store, counters, pid, "bpf-prog-load")
    assert counters.total() == 0


def test_every_mediation_ticks_exactly_one_counter(world):
    table, store, counters = world
    pid = remote_pid(table)
    rng = random.Random(11)
    calls = 0
    for _ in range(500):
        if rng.random() < 0.5:
            mediate_file(table, store, counters, pid, f"/d{rng.randint(0, 5)}/x", rng.choice([Mode.READ, Mode.WRITE]))
        else:
            mediate_iface(table, store, counters, pid, rng.choice(sorted(IFACE_REGISTRY)))
        calls += 1
        assert counters.total() == calls


def test_planes_never_cross():
    rng = random.Random(23)
    for _ in range(400):
        policy = random_policy(rng)
        req = random_request(rng, policy)
        decision = evaluate(policy, req)
        if decision.matched_rule is not None:
            assert policy.rules[decision.matched_rule].kind is req.kind
    # an interface named like a path component never meets path rules
    policy = PolicyStore(default_policy())
    assert policy.evaluate(AccessRequest.iface(Origin.REMOTE, "sys")).allowed


def test_render_decision_frozen():
    assert render_decision(Decision(Action.ALLOW, None, Reason.DEFAULT_ALLOW, 0)) == "ALLOW"
    assert render_decision(Decision(Action.ALLOW, 0, Reason.RULE_MATCH, 0)) == "ALLOW rule=0"
    assert render_decision(Decision(Action.DENY, 3, Reason.RULE_MATCH, 1)) == "DENY(EPERM) rule=3"
