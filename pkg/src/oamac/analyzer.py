"""Static policy analysis: dead rules, order hazards, reachability.

First-match semantics make rule order load-bearing, so the analyzer's job
is to say which rules can never fire and where order is doing the work.
Analysis runs over a closed probe universe derived from the policy itself:
every pattern, plus one synthetic path strictly below each path pattern,
crossed with every origin the policy mentions and both access modes. For
prefix matching that universe exhausts the distinct matching behaviors, so
"never the first match on the universe" is exact, not heuristic. A rule
dominated by a single earlier rule is the classic shadow; a rule whose
matches are carved up among several earlier rules, or one gated off by the
unknown-origin exemption, is just as dead and is reported the same way.

Order conflicts are a different animal: two overlapping rules with opposite
actions where swapping them would flip some request's outcome. In a policy
whose exceptions deliberately precede broad denies these pairs are benign
and expected, so they are reported as informational notes, distinct from
the findings that indicate a defect (shadowed and ineffective-exception
rules, and rules naming interfaces nothing registers).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .kernel import Origin, POLICY_ORIGINS
from .mediation import IFACE_REGISTRY
from .dsl import format_rule
from .paths import prefix_match
from .policy import (
    AccessRequest,
    Action,
    Mode,
    Policy,
    PolicyRule,
    Reason,
    RuleKind,
    evaluate,
)

SYNTHETIC_SEGMENT = "__probe__"


class FindingKind(Enum):
    SHADOWED = "shadowed"
    INEFFECTIVE_EXCEPTION = "ineffective-exception"
    ORDER_CONFLICT = "order-conflict"
    UNKNOWN_INTERFACE = "unknown-interface"


W_CODES = {
    FindingKind.SHADOWED: "W001",
    FindingKind.INEFFECTIVE_EXCEPTION: "W002",
    FindingKind.ORDER_CONFLICT: "W003",
    FindingKind.UNKNOWN_INTERFACE: "W004",
}

_KIND_RANK = {kind: i for i, kind in enumerate(FindingKind)}


@dataclass(frozen=True)
class Finding:
    kind: FindingKind
    rule_index: int
    related_index: int | None
    message: str


def probe_universe(policy: Policy) -> list[AccessRequest]:
    """Finite request set that exercises every reachable first-match.

    Path probes are each pattern and one synthetic child below it, in READ
    and WRITE modes; interface probes are each distinct name. Origins are
    exactly those the policy mentions: a request with an origin no rule
    names can only fall through to the default and says nothing about rule
    reachability.
    """
    origins = sorted(
        {o for rule in policy.rules for o in rule.origins},
        key=POLICY_ORIGINS.index,
    )
    paths: list[str] = []
    ifaces: list[str] = []
    for rule in policy.rules:
        targets = paths if rule.kind is RuleKind.PATH else ifaces
        if rule.pattern not in targets:
            targets.append(rule.pattern)
    requests: list[AccessRequest] = []
    for pattern in paths:
        child = pattern.rstrip("/") + "/" + SYNTHETIC_SEGMENT
        for target in (pattern, child):
            for origin in origins:
                for mode in (Mode.READ, Mode.WRITE):
                    requests.append(AccessRequest.file(origin, target, mode))
    for name in ifaces:
        for origin in origins:
            requests.append(AccessRequest.iface(origin, name))
    return requests


def _first_match_indexes(policy: Policy) -> set[int]:
    live: set[int] = set()
    for request in probe_universe(policy):
        decision = evaluate(policy, request)
        if decision.reason is Reason.RULE_MATCH:
            live.add(decision.matched_rule)
    return live


def _covers(earlier: PolicyRule, later: PolicyRule) -> bool:
    """Single-rule domination: every request the later rule matches, the
    earlier one matches too."""
    if earlier.kind is not later.kind:
        return False
    if not later.origins <= earlier.origins:
        return False
    if earlier.kind is RuleKind.IFACE:
        return earlier.pattern == later.pattern
    if not prefix_match(earlier.pattern, later.pattern):
        return False
    return earlier.mode is Mode.ANY or earlier.mode is later.mode


def find_shadowed(policy: Policy) -> list[Finding]:
    """Rules that can never be the first match, with the culprit when
    one earlier rule is singly responsible."""
    live = _first_match_indexes(policy)
    findings: list[Finding] = []
    for j, rule in enumerate(policy.rules):
        if j in live:
            continue
        dominator = None
        for i in range(j):
            if _covers(policy.rules[i], rule):
                dominator = i
                break
        desc = format_rule(rule)
        if dominator is not None and rule.action is Action.ALLOW and (
            policy.rules[dominator].action is Action.DENY
        ):
            kind = FindingKind.INEFFECTIVE_EXCEPTION
            message = (
                f"exception rule {j} ({desc}) never fires; "
                f"rule {dominator} ({format_rule(policy.rules[dominator])}) "
                "denies first, move the exception above it"
            )
        elif dominator is not None:
            kind = FindingKind.SHADOWED
            message = (
                f"rule {j} ({desc}) never fires; shadowed by "
                f"rule {dominator} ({format_rule(policy.rules[dominator])})"
            )
        else:
            kind = FindingKind.SHADOWED
            message = (
                f"rule {j} ({desc}) never fires; its matches are fully "
                "covered by earlier rules or exempt origins"
            )
        findings.append(Finding(kind, j, dominator, message))
    return findings


def check_order_conflicts(policy: Policy) -> list[Finding]:
    """Overlapping opposite-action pairs whose order decides outcomes.

    Benign in a correctly ordered policy (an exception before its broad
    deny is exactly such a pair), so these are notes, not defects.
    """
    findings: list[Finding] = []
    rules = policy.rules
    for i in range(len(rules)):
        for j in range(i + 1, len(rules)):
            a, b = rules[i], rules[j]
            if a.kind is not b.kind or a.action is b.action:
                continue
            if not a.origins & b.origins:
                continue
            if not (a.mode is Mode.ANY or b.mode is Mode.ANY or a.mode is b.mode):
                continue
            if a.kind is RuleKind.IFACE:
                overlap = a.pattern == b.pattern
            else:
                overlap = prefix_match(a.pattern, b.pattern) or prefix_match(
                    b.pattern, a.pattern
                )
            if not overlap:
                continue
            findings.append(
                Finding(
                    FindingKind.ORDER_CONFLICT,
                    i,
                    j,
                    f"rules {i} and {j} overlap with opposite actions; "
                    "their relative order decides some requests",
                )
            )
    return findings


def find_unknown_interfaces(policy: Policy) -> list[Finding]:
    findings = []
    for idx, rule in enumerate(policy.rules):
        if rule.kind is RuleKind.IFACE and rule.pattern not in IFACE_REGISTRY:
            findings.append(
                Finding(
                    FindingKind.UNKNOWN_INTERFACE,
                    idx,
                    None,
                    f"rule {idx} names unregistered interface {rule.pattern!r}",
                )
            )
    return findings


def lint(policy: Policy) -> list[Finding]:
    """Defect findings only; order-conflict notes are reported separately."""
    findings = find_shadowed(policy) + find_unknown_interfaces(policy)
    findings.sort(key=lambda f: (f.rule_index, _KIND_RANK[f.kind]))
    return findings


def render_findings(findings, source_lines: list[int] | None = None) -> str:
    """`W<code> line <n>: <message>` per finding; lines are 1-based rule
    positions unless the policy came from a file with real line numbers."""
    out = []
    for f in findings:
        if source_lines is not None and f.rule_index < len(source_lines):
            line = source_lines[f.rule_index]
        else:
            line = f.rule_index + 1
        out.append(f"{W_CODES[f.kind]} line {line}: {f.message}")
    return "\n".join(out) + ("\n" if out else "")


def default_probes(policy: Policy) -> list[tuple[RuleKind, str]]:
    paths = sorted({r.pattern for r in policy.rules if r.kind is RuleKind.PATH})
    ifaces = sorted(
        {r.pattern for r in policy.rules if r.kind is RuleKind.IFACE} | IFACE_REGISTRY
    )
    return [(RuleKind.PATH, p) for p in paths] + [(RuleKind.IFACE, n) for n in ifaces]


def reachability(
    policy: Policy,
    origins: tuple[Origin, ...] = POLICY_ORIGINS,
    probes: list[tuple[RuleKind, str]] | None = None,
) -> list[tuple[str, dict[Origin, Action]]]:
    """Evaluate each probe for each origin. Path probes use READ mode, the
    laxer mode under the default policy, so a deny cell means deny even
    for reads."""
    if probes is None:
        probes = default_probes(policy)
    rows = []
    for kind, target in probes:
        if kind is RuleKind.PATH:
            cells = {
                o: evaluate(policy, AccessRequest.file(o, target, Mode.READ)).action
                for o in origins
            }
        else:
            cells = {
                o: evaluate(policy, AccessRequest.iface(o, target)).action
                for o in origins
            }
        rows.append((target, cells))
    return rows


def render_reachability(rows, origins: tuple[Origin, ...] = POLICY_ORIGINS) -> str:
    """Fixed-width matrix, probes down the side, origins across the top."""
    if not rows:
        return ""
    label_w = max(len("probe"), max(len(label) for label, _ in rows))
    col_ws = [max(len(o.value), 5) for o in origins]
    header = "probe".ljust(label_w) + "".join(
        "  " + o.value.ljust(w) for o, w in zip(origins, col_ws)
    )
    lines = [header.rstrip()]
    for label, cells in rows:
        line = label.ljust(label_w) + "".join(
            "  " + cells[o].value.ljust(w) for o, w in zip(origins, col_ws)
        )
        lines.append(line.rstrip())
    return "\n".join(lines) + "\n"
