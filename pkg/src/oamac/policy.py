"""First-match policy engine, policy store, and audit counters.

A policy is an ordered rule list plus an enforce-unknown toggle. Evaluation
is three exemption checks and a scan: BOOTSTRAP subjects are always allowed
(early boot must not wedge), UNKNOWN subjects are allowed unless enforcement
of unknowns is switched on, and otherwise the first rule matching the
request decides. No rule matching means allow: the mechanism is a deny
overlay on an otherwise permissive system, so an empty policy changes
nothing.

Two evaluators live here on purpose. :func:`evaluate` is the reference
semantics, a plain linear scan with no indexing. :class:`CompiledPolicy`
is the production evaluator used on the mediation hot path: it indexes path
rules in a component trie, interface rules by name, pre-builds one Decision
per rule, and memoizes decisions per request (evaluation against a fixed
policy is pure, so caching is sound, in the spirit of an access-vector
cache). The test suite holds the two to exact agreement.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum

from .kernel import Origin
from .paths import normalize_path, path_components, prefix_match

EPERM = 1

_DECISION_CACHE_LIMIT = 1 << 16
IFACE_NAME_RE = re.compile(r"^[a-z0-9]+(?:-[a-z0-9]+)*$")


class Action(Enum):
    ALLOW = "allow"
    DENY = "deny"


class Mode(Enum):
    READ = "read"
    WRITE = "write"
    ANY = "any"


class RuleKind(Enum):
    PATH = "path"
    IFACE = "iface"


class Reason(Enum):
    DEFAULT_ALLOW = "default-allow"
    RULE_MATCH = "rule-match"
    BOOTSTRAP_EXEMPT = "bootstrap-exempt"
    UNKNOWN_EXEMPT = "unknown-exempt"


class PolicyError(ValueError):
    """A rule or rule set failed validation; nothing was installed."""

    def __init__(self, problems: list[str]):
        super().__init__("; ".join(problems))
        self.problems = problems


@dataclass(frozen=True)
class PolicyRule:
    """One ordered rule: kind + pattern + action + origin set + mode.

    The mode qualifier only narrows path rules; interface matching ignores
    it. Origin sets never contain BOOTSTRAP, which is exempt by
    construction rather than by configuration.
    """

    kind: RuleKind
    pattern: str
    action: Action
    origins: frozenset[Origin]
    mode: Mode = Mode.ANY

    def problems(self) -> list[str]:
        out: list[str] = []
        if not self.origins:
            out.append("empty origin set")
        if Origin.BOOTSTRAP in self.origins:
            out.append("bootstrap origin is not a policy subject")
        if self.kind is RuleKind.PATH:
            if not self.pattern.startswith("/"):
                out.append(f"path pattern must be absolute: {self.pattern!r}")
            elif self.pattern != _canonical(self.pattern):
                out.append(f"path pattern not canonical: {self.pattern!r}")
        else:
            if not IFACE_NAME_RE.match(self.pattern):
                out.append(f"bad interface name: {self.pattern!r}")
        return out


def _canonical(pattern: str) -> str:
    try:
        return normalize_path(pattern)
    except ValueError:
        return ""


def path_rule(pattern: str, action: Action, origins, mode: Mode = Mode.ANY) -> PolicyRule:
    return PolicyRule(RuleKind.PATH, pattern, action, frozenset(origins), mode)


def iface_rule(name: str, action: Action, origins) -> PolicyRule:
    return PolicyRule(RuleKind.IFACE, name, action, frozenset(origins))


@dataclass(frozen=True)
class Policy:
    rules: tuple[PolicyRule, ...] = ()
    enforce_unknown: bool = False
    version: int = 0


@dataclass(frozen=True)
class AccessRequest:
    """A subject origin asking for one object: a file path or an interface."""

    origin: Origin
    kind: RuleKind
    target: str
    mode: Mode = Mode.ANY

    @classmethod
    def file(cls, origin: Origin, path: str, mode: Mode) -> AccessRequest:
        return cls(origin, RuleKind.PATH, path, mode)

    @classmethod
    def iface(cls, origin: Origin, name: str) -> AccessRequest:
        return cls(origin, RuleKind.IFACE, name)


@dataclass(frozen=True)
class Decision:
    action: Action
    matched_rule: int | None
    reason: Reason
    errno: int

    @property
    def allowed(self) -> bool:
        return self.action is Action.ALLOW


_BOOTSTRAP_ALLOW = Decision(Action.ALLOW, None, Reason.BOOTSTRAP_EXEMPT, 0)
_UNKNOWN_ALLOW = Decision(Action.ALLOW, None, Reason.UNKNOWN_EXEMPT, 0)
_DEFAULT_ALLOW = Decision(Action.ALLOW, None, Reason.DEFAULT_ALLOW, 0)


def _mode_covers(rule_mode: Mode, req_mode: Mode) -> bool:
    return rule_mode is Mode.ANY or rule_mode is req_mode


def rule_matches(rule: PolicyRule, request: AccessRequest) -> bool:
    if rule.kind is not request.kind:
        return False
    if request.origin not in rule.origins:
        return False
    if rule.kind is RuleKind.IFACE:
        return rule.pattern == request.target
    return _mode_covers(rule.mode, request.mode) and prefix_match(rule.pattern, request.target)


def evaluate(policy: Policy, request: AccessRequest) -> Decision:
    """Reference first-match evaluation: exemptions, then a linear scan."""
    if request.origin is Origin.BOOTSTRAP:
        return _BOOTSTRAP_ALLOW
    if request.origin is Origin.UNKNOWN and not policy.enforce_unknown:
        return _UNKNOWN_ALLOW
    for idx, rule in enumerate(policy.rules):
        if rule_matches(rule, request):
            errno = 0 if rule.action is Action.ALLOW else EPERM
            return Decision(rule.action, idx, Reason.RULE_MATCH, errno)
    return _DEFAULT_ALLOW


_MODE_BITS = {Mode.READ: 1, Mode.WRITE: 2, Mode.ANY: 3}


class CompiledPolicy:
    """Indexed evaluator, decision-identical to :func:`evaluate`."""

    __slots__ = ("policy", "_iface_index", "_path_root", "_enforce_unknown", "_cache")

    def __init__(self, policy: Policy):
        self.policy = policy
        self._enforce_unknown = policy.enforce_unknown
        self._cache: dict[AccessRequest, Decision] = {}
        self._iface_index: dict[str, list[tuple]] = {}
        # Trie node: (rules-ending-here, children-by-segment).
        self._path_root: tuple[list, dict] = ([], {})
        for idx, rule in enumerate(policy.rules):
            errno = 0 if rule.action is Action.ALLOW else EPERM
            entry = (
                idx,
                rule.origins,
                _MODE_BITS[rule.mode],
                Decision(rule.action, idx, Reason.RULE_MATCH, errno),
            )
            if rule.kind is RuleKind.IFACE:
                self._iface_index.setdefault(rule.pattern, []).append(entry)
            else:
                node = self._path_root
                for seg in path_components(rule.pattern):
                    node = node[1].setdefault(seg, ([], {}))
                node[0].append(entry)

    def evaluate(self, request: AccessRequest) -> Decision:
        cached = self._cache.get(request)
        if cached is not None:
            return cached
        decision = self._lookup(request)
        if len(self._cache) >= _DECISION_CACHE_LIMIT:
            self._cache.clear()
        self._cache[request] = decision
        return decision

    def _lookup(self, request: AccessRequest) -> Decision:
        origin = request.origin
        if origin is Origin.BOOTSTRAP:
            return _BOOTSTRAP_ALLOW
        if origin is Origin.UNKNOWN and not self._enforce_unknown:
            return _UNKNOWN_ALLOW
        if request.kind is RuleKind.IFACE:
            for _idx, origins, _mbits, decision in self._iface_index.get(request.target, ()):
                if origin in origins:
                    return decision
            return _DEFAULT_ALLOW
        qbits = _MODE_BITS[request.mode]
        best_idx = 1 << 30
        best = None
        node = self._path_root
        for idx, origins, mbits, decision in node[0]:
            if idx < best_idx and (mbits == 3 or mbits == qbits) and origin in origins:
                best_idx, best = idx, decision
        for seg in path_components(request.target):
            node = node[1].get(seg)
            if node is None:
                break
            for idx, origins, mbits, decision in node[0]:
                if idx < best_idx and (mbits == 3 or mbits == qbits) and origin in origins:
                    best_idx, best = idx, decision
        return best if best is not None else _DEFAULT_ALLOW


class PolicyStore:
    """Holds the active policy; every change is all-or-nothing.

    Install validates the whole rule list first and only then swaps the
    active (policy, compiled) pair in a single reference assignment, so a
    reader never observes a half-updated policy. The version counter
    increments on every successful install and never goes backwards.
    """

    def __init__(self, policy: Policy | None = None):
        initial = policy if policy is not None else Policy()
        self._active: tuple[Policy, CompiledPolicy] = (initial, CompiledPolicy(initial))

    @property
    def policy(self) -> Policy:
        return self._active[0]

    @property
    def version(self) -> int:
        return self._active[0].version

    def evaluate(self, request: AccessRequest) -> Decision:
        return self._active[1].evaluate(request)

    def install(self, rules, enforce_unknown: bool | None = None) -> int:
        """Replace the rule list atomically; returns the new version."""
        rules = tuple(rules)
        problems = []
        for idx, rule in enumerate(rules):
            problems.extend(f"rule {idx}: {p}" for p in rule.problems())
        if problems:
            raise PolicyError(problems)
        current = self._active[0]
        enforce = current.enforce_unknown if enforce_unknown is None else enforce_unknown
        new = Policy(rules, enforce, current.version + 1)
        self._active = (new, CompiledPolicy(new))
        return new.version

    def append_rule(self, rule: PolicyRule) -> int:
        return self.install(
            self.policy.rules + (rule,), enforce_unknown=self.policy.enforce_unknown
        )

    def remove_rule(self, index: int) -> int:
        rules = self.policy.rules
        if not 0 <= index < len(rules):
            raise IndexError(f"no rule at index {index} (policy has {len(rules)})")
        return self.install(
            rules[:index] + rules[index + 1 :], enforce_unknown=self.policy.enforce_unknown
        )

    def set_enforce_unknown(self, value: bool) -> int:
        return self.install(self.policy.rules, enforce_unknown=value)


_RS = frozenset({Origin.REMOTE, Origin.SERVICE})


def default_policy() -> Policy:
    """Baseline lockdown: BTF metadata stays readable, everything else
    that can change kernel behavior is closed to remote and service
    subjects. Physical and control-plane origins are untouched."""
    rules = (
        PolicyRule(RuleKind.PATH, "/sys/kernel/btf", Action.ALLOW, _RS, Mode.READ),
        PolicyRule(RuleKind.PATH, "/sys", Action.DENY, frozenset({Origin.REMOTE})),
        PolicyRule(RuleKind.PATH, "/etc/oamac", Action.DENY, _RS),
        PolicyRule(RuleKind.IFACE, "bpf-prog-load", Action.DENY, _RS),
        PolicyRule(RuleKind.IFACE, "bpf-map-create", Action.DENY, _RS),
        PolicyRule(RuleKind.IFACE, "bpf-map-update", Action.DENY, _RS),
    )
    return Policy(rules=rules, enforce_unknown=False, version=0)


class AuditCounters:
    """Per-(mediation point, origin, action) decision tallies."""

    def __init__(self) -> None:
        self._counts: dict[tuple[str, Origin, Action], int] = {}

    def record(self, point: str, origin: Origin, action: Action) -> None:
        key = (point, origin, action)
        self._counts[key] = self._counts.get(key, 0) + 1

    def count(self, point: str, origin: Origin, action: Action) -> int:
        return self._counts.get((point, origin, action), 0)

    def total(self) -> int:
        return sum(self._counts.values())

    def snapshot(self) -> list[tuple[str, str, str, int]]:
        """Rows (point, origin, action, count) in stable lexicographic order."""
        rows = [
            (point, origin.value, action.value, n)
            for (point, origin, action), n in self._counts.items()
        ]
        rows.sort(key=lambda r: (r[0], r[1], r[2]))
        return rows

    def load_rows(self, rows) -> None:
        for point, origin, action, n in rows:
            self._counts[(point, Origin(origin), Action(action))] = int(n)


def render_counters(counters: AuditCounters) -> str:
    """One `point origin action count` line per key; empty table, empty text."""
    lines = [f"{p} {o} {a} {n}" for p, o, a, n in counters.snapshot()]
    return "\n".join(lines) + ("\n" if lines else "")
