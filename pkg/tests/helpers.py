"""Seeded generators and independent reference models shared by tests.

Reference logic here is deliberately re-derived with plain loops and its
own small helpers rather than calling into the package's matchers, so
each comparison pits two independently written routes against each other.
"""

from __future__ import annotations

import random

from oamac.kernel import (
    POLICY_ORIGINS,
    Origin,
    ProcessTable,
    SessionEntry,
    SessionKind,
    TerminalAssociation,
    boot,
)
from oamac.policy import AccessRequest, Action, Mode, Policy, PolicyRule, RuleKind

SEGMENTS = ["sys", "etc", "var", "srv", "kernel", "btf", "oamac", "net", "data", "x1"]
IFACES = ["bpf-prog-load", "bpf-map-create", "bpf-map-update", "io-uring-setup", "kexec-load"]
RULE_ORIGINS = list(POLICY_ORIGINS)
REQUEST_ORIGINS = RULE_ORIGINS + [Origin.BOOTSTRAP]
SESSION_KINDS = [k.value for k in SessionKind]


# ---------------------------------------------------------------- generators

def random_path(rng: random.Random, min_depth: int = 1, max_depth: int = 4) -> str:
    depth = rng.randint(min_depth, max_depth)
    return "/" + "/".join(rng.choice(SEGMENTS) for _ in range(depth))


def random_rule(rng: random.Random) -> PolicyRule:
    origins = frozenset(rng.sample(RULE_ORIGINS, rng.randint(1, 3)))
    action = rng.choice([Action.ALLOW, Action.DENY])
    if rng.random() < 0.65:
        mode = rng.choice([Mode.ANY, Mode.ANY, Mode.READ, Mode.WRITE])
        return PolicyRule(RuleKind.PATH, random_path(rng), action, origins, mode)
    return PolicyRule(RuleKind.IFACE, rng.choice(IFACES), action, origins)


def random_policy(rng: random.Random, max_rules: int = 20) -> Policy:
    rules = tuple(random_rule(rng) for _ in range(rng.randint(0, max_rules)))
    return Policy(rules, enforce_unknown=rng.random() < 0.25, version=1)


def random_request(rng: random.Random, policy: Policy | None = None) -> AccessRequest:
    """Random request, biased toward targets the policy actually mentions."""
    origin = rng.choice(REQUEST_ORIGINS)
    if policy is not None and policy.rules and rng.random() < 0.6:
        rule = rng.choice(policy.rules)
        if rule.kind is RuleKind.IFACE:
            return AccessRequest.iface(origin, rule.pattern)
        target = rule.pattern
        if rng.random() < 0.5:
            target = target.rstrip("/") + "/" + rng.choice(SEGMENTS)
        return AccessRequest.file(origin, target, rng.choice([Mode.READ, Mode.WRITE]))
    if rng.random() < 0.7:
        return AccessRequest.file(
            origin, random_path(rng, max_depth=5), rng.choice([Mode.READ, Mode.WRITE])
        )
    return AccessRequest.iface(origin, rng.choice(IFACES))


# ------------------------------------------- first-match reference decision

def oracle_components(path: str) -> list[str]:
    return [seg for seg in path.split("/") if seg]


def oracle_prefix(pattern: str, path: str) -> bool:
    pc = oracle_components(pattern)
    return oracle_components(path)[: len(pc)] == pc


def oracle_decide(policy: Policy, request: AccessRequest):
    """Plain linear scan returning (action value, matched index, reason value)."""
    if request.origin is Origin.BOOTSTRAP:
        return "allow", None, "bootstrap-exempt"
    if request.origin is Origin.UNKNOWN and not policy.enforce_unknown:
        return "allow", None, "unknown-exempt"
    for idx, rule in enumerate(policy.rules):
        if rule.kind is not request.kind:
            continue
        if request.origin not in rule.origins:
            continue
        if rule.kind is RuleKind.PATH:
            if rule.mode is not Mode.ANY and rule.mode is not request.mode:
                continue
            if not oracle_prefix(rule.pattern, request.target):
                continue
        elif rule.pattern != request.target:
            continue
        return rule.action.value, idx, "rule-match"
    return "allow", None, "default-allow"


# --------------------------------------------------- analyzer brute force

def brute_force_dead(policy: Policy) -> set[int]:
    """Rule indexes that are never a first match on the closed universe."""
    origins = sorted(
        {o for rule in policy.rules for o in rule.origins}, key=POLICY_ORIGINS.index
    )
    paths: list[str] = []
    ifaces: list[str] = []
    for rule in policy.rules:
        bucket = paths if rule.kind is RuleKind.PATH else ifaces
        if rule.pattern not in bucket:
            bucket.append(rule.pattern)
    live: set[int] = set()
    for pattern in paths:
        for target in (pattern, pattern.rstrip("/") + "/__probe__"):
            for origin in origins:
                for mode in (Mode.READ, Mode.WRITE):
                    _a, idx, reason = oracle_decide(
                        policy, AccessRequest.file(origin, target, mode)
                    )
                    if reason == "rule-match":
                        live.add(idx)
    for name in ifaces:
        for origin in origins:
            _a, idx, reason = oracle_decide(policy, AccessRequest.iface(origin, name))
            if reason == "rule-match":
                live.add(idx)
    return set(range(len(policy.rules))) - live


# ------------------------------------------------ kernel sequence machinery

def random_terminal_spec(rng: random.Random):
    """None, ("console", id), or ("pty", id, allocated-by-or-None)."""
    roll = rng.random()
    if roll < 0.30:
        return None
    if roll < 0.55:
        return "console", f"tty{rng.randint(0, 3)}"
    allocated = rng.choice([None, *SESSION_KINDS])
    return "pty", f"pts{rng.randint(0, 3)}", allocated


def terminal_from_spec(spec) -> TerminalAssociation:
    if spec is None:
        return TerminalAssociation.none()
    if spec[0] == "console":
        return TerminalAssociation.console(spec[1])
    allocated = SessionKind(spec[2]) if spec[2] else None
    return TerminalAssociation.pty(spec[1], allocated)


def oracle_classify(kind: str, spec) -> str:
    """Session classification re-derived: mismatched claims go unknown."""
    if spec is not None and spec[0] == "pty" and spec[2] is None:
        return "unknown"  # pty with no allocator is malformed
    shape = "none" if spec is None else spec[0]
    if kind == "console-login":
        return "physical" if shape == "console" else "unknown"
    if kind == "remote-login":
        return "remote" if shape == "pty" else "unknown"
    if kind == "service-start":
        return "service" if shape == "none" else "unknown"
    return "control-plane"


def oracle_reclassify(spec) -> str:
    """Exec-time reclassification of an UNKNOWN process from its terminal."""
    if spec is None:
        return "service"
    if spec[0] == "console":
        return "physical"
    if spec[2] == "remote-login":
        return "remote"
    if spec[2] == "control-plane-start":
        return "control-plane"
    return "unknown"


_NONPHYS = ("remote", "service", "control-plane")


def run_random_sequence(rng: random.Random, steps: int | None = None):
    """Drive the real table and an independent origin model in lockstep.

    Returns (table, model, bootstrap_at_ready, events) where model maps
    pid -> (expected origin value, ppid, terminal spec) and events can be
    replayed via :func:`apply_events` for determinism checks.
    """
    table = boot()
    model: dict[int, tuple[str, int, object]] = {1: ("bootstrap", 0, None)}
    alive = {1}
    ready = False
    bootstrap_at_ready: set[int] | None = None
    events: list[tuple] = []
    if steps is None:
        steps = rng.randint(5, 18)
    for _ in range(steps):
        choices = ["exec", "fork", "exit"]
        choices += ["session"] * 3 if ready else ["ready"] * 2
        op = rng.choice(choices)
        if op == "ready":
            table.mark_ready()
            ready = True
            # tombstones included: origins never change, so the bootstrap
            # population is frozen exactly here
            bootstrap_at_ready = {p for p, (o, _, _) in model.items() if o == "bootstrap"}
            events.append(("ready",))
        elif op == "session":
            kind = rng.choice(SESSION_KINDS)
            spec = random_terminal_spec(rng)
            pid = table.session_entry(SessionEntry(SessionKind(kind), terminal_from_spec(spec)))
            model[pid] = (oracle_classify(kind, spec), 1, spec)
            alive.add(pid)
            events.append(("session", kind, spec, pid))
        elif op == "fork":
            candidates = [p for p in sorted(alive) if not (ready and model[p][0] == "bootstrap")]
            if not candidates:
                continue
            parent = rng.choice(candidates)
            pid = table.fork(parent)
            model[pid] = (model[parent][0], parent, model[parent][2])
            alive.add(pid)
            events.append(("fork", parent, pid))
        elif op == "exec":
            pid = rng.choice(sorted(alive))
            spec = "keep" if rng.random() < 0.4 else random_terminal_spec(rng)
            table.exec(pid, "img", None if spec == "keep" else terminal_from_spec(spec))
            origin, ppid, stored = model[pid]
            if origin == "unknown":
                effective = stored if spec == "keep" else spec
                new = oracle_reclassify(effective)
                if new == "physical" and ppid in model and model[ppid][0] in _NONPHYS:
                    new = "unknown"
                model[pid] = (new, ppid, stored)
            events.append(("exec", pid, spec))
        else:
            candidates = [p for p in sorted(alive) if p != 1]
            if not candidates:
                continue
            pid = rng.choice(candidates)
            table.exit(pid)
            alive.discard(pid)
            events.append(("exit", pid))
    return table, model, bootstrap_at_ready, events


def apply_events(events) -> ProcessTable:
    table = boot()
    for ev in events:
        if ev[0] == "ready":
            table.mark_ready()
        elif ev[0] == "session":
            table.session_entry(SessionEntry(SessionKind(ev[1]), terminal_from_spec(ev[2])))
        elif ev[0] == "fork":
            table.fork(ev[1])
        elif ev[0] == "exec":
            spec = ev[2]
            table.exec(ev[1], "img", None if spec == "keep" else terminal_from_spec(spec))
        elif ev[0] == "exit":
            table.exit(ev[1])
    return table
