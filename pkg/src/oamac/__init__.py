"""Origin-aware mandatory access control, simulated in userspace.

The package tracks how execution entered a system (console, remote login,
service manager, control plane, early boot) as a per-process origin label,
propagates it across fork and exec, and enforces an ordered first-match
policy over file paths and privileged kernel interfaces at two mediation
points. A small policy language, a static analyzer, a scenario runner, and
the `oamacctl` CLI sit on top.
"""

from .kernel import (
    NO_TERMINAL,
    Origin,
    POLICY_ORIGINS,
    ProcessTable,
    SessionEntry,
    SessionKind,
    TerminalAssociation,
    TerminalKind,
    boot,
    classify,
)
from .mediation import IFACE_REGISTRY, mediate_file, mediate_iface, render_decision
from .paths import normalize_path, path_components, prefix_match
from .policy import (
    EPERM,
    AccessRequest,
    Action,
    AuditCounters,
    CompiledPolicy,
    Decision,
    Mode,
    Policy,
    PolicyRule,
    PolicyStore,
    Reason,
    RuleKind,
    default_policy,
    evaluate,
    render_counters,
)

__all__ = [
    "AccessRequest",
    "Action",
    "AuditCounters",
    "CompiledPolicy",
    "Decision",
    "EPERM",
    "IFACE_REGISTRY",
    "Mode",
    "NO_TERMINAL",
    "Origin",
    "POLICY_ORIGINS",
    "Policy",
    "PolicyRule",
    "PolicyStore",
    "ProcessTable",
    "Reason",
    "RuleKind",
    "SessionEntry",
    "SessionKind",
    "TerminalAssociation",
    "TerminalKind",
    "boot",
    "classify",
    "default_policy",
    "evaluate",
    "mediate_file",
    "mediate_iface",
    "normalize_path",
    "path_components",
    "prefix_match",
    "render_counters",
    "render_decision",
]

__version__ = "0.1.0"
