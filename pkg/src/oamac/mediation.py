"""Mediation points: where subjects meet objects and counters tick.

File accesses and privileged-interface invocations each pass through
exactly one function here. Both resolve the subject's origin from the
process table, evaluate the active policy, and bump an audit counter
keyed by (mediation point, origin, action). The file plane counts under
the single point "file"; each interface counts under its own name, so
per-interface deny tallies survive aggregation.

The two planes never mix: a path rule cannot match an interface request
and vice versa, which :func:`oamac.policy.rule_matches` enforces by kind
before anything else is compared.
"""

from __future__ import annotations

from .kernel import ProcessTable
from .paths import PathError, normalize_path, prefix_match  # re-exported
from .policy import (
    IFACE_NAME_RE,
    AccessRequest,
    AuditCounters,
    Decision,
    Mode,
    PolicyStore,
)

__all__ = [
    "FILE_POINT",
    "IFACE_REGISTRY",
    "MediationError",
    "mediate_file",
    "mediate_iface",
    "normalize_path",
    "prefix_match",
    "render_decision",
]

FILE_POINT = "file"

# Interface names known at build time. The namespace is open: mediating an
# unregistered name is legal, the analyzer merely warns about rules that
# target one.
IFACE_REGISTRY = frozenset({"bpf-prog-load", "bpf-map-create", "bpf-map-update"})


class MediationError(ValueError):
    pass


def mediate_file(
    table: ProcessTable,
    store: PolicyStore,
    counters: AuditCounters,
    pid: int,
    raw_path: str,
    mode: Mode,
) -> Decision:
    """Decide a file access for a live process and record the outcome.

    The raw path is normalized before matching; a relative path is the
    caller's bug and raises :class:`PathError` without touching counters.
    """
    if mode is Mode.ANY:
        raise MediationError("file access must be read or write")
    record = table.alive_record(pid)
    path = normalize_path(raw_path)
    decision = store.evaluate(AccessRequest.file(record.origin, path, mode))
    counters.record(FILE_POINT, record.origin, decision.action)
    return decision


def mediate_iface(
    table: ProcessTable,
    store: PolicyStore,
    counters: AuditCounters,
    pid: int,
    iface: str,
) -> Decision:
    """Decide a privileged-interface invocation and record the outcome."""
    record = table.alive_record(pid)
    if not IFACE_NAME_RE.match(iface):
        raise MediationError(f"bad interface name: {iface!r}")
    decision = store.evaluate(AccessRequest.iface(record.origin, iface))
    counters.record(iface, record.origin, decision.action)
    return decision


def render_decision(decision: Decision) -> str:
    """Stable one-token rendering used by scenario transcripts."""
    base = "ALLOW" if decision.allowed else "DENY(EPERM)"
    if decision.matched_rule is None:
        return base
    return f"{base} rule={decision.matched_rule}"
