"""Scenario scripts: replayable event logs with access assertions.

A scenario drives a fresh simulated system through sessions, forks, execs,
policy edits, and mediated accesses, asserting allow/deny at each access.
Scripts are line-oriented; `#` starts a comment anywhere.

Event steps::

    boot                     first step; binds the variable `init` to pid 1
    ready                    close the bootstrap phase
    session <kind> [tty <id>] -> <var>
    fork <var> -> <var>
    exec <var> <image> [tty <id> | pty <id> [<session-kind>] | notty]
    exit <var>

`session` kinds are console-login, remote-login, service-start and
control-plane-start; the terminal shape follows the kind (console logins
get a physical console, remote and control-plane logins a pseudo-terminal).
An omitted or mismatched tty yields a malformed entry on purpose: that is
how scripts manufacture UNKNOWN-origin processes. In `exec`, `tty <id>`
claims a physical console (the forgeable case), `notty` claims no terminal,
and `pty <id>` without an allocator is deliberately ambiguous.

Policy steps::

    policy default           install the baseline policy
    policy {                 install the rules between the braces
      <policy-language lines>
    }
    rule add <rule text>
    rule del <index>

Assertions and output::

    read <var> <path> expect allow|deny
    write <var> <path> expect allow|deny
    iface <var> <name> expect allow|deny
    counters                 dump the audit table into the transcript

Transcripts are deterministic: identical scripts produce byte-identical
transcripts, which makes golden-file comparison meaningful. When a runner
is given an operator origin, policy steps are themselves mediated as that
origin (a write to the policy config path plus a policy-map update) before
being applied, so a script can demonstrate that a remote operator cannot
weaken enforcement. Without an operator origin, policy steps model the
trusted local configuration surface and apply directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import dsl
from .kernel import (
    KernelError,
    Origin,
    ProcessTable,
    SessionEntry,
    SessionKind,
    TerminalAssociation,
    boot,
)
from .mediation import mediate_file, mediate_iface, render_decision
from .paths import PathError
from .policy import Action, AuditCounters, Mode, PolicyError, PolicyStore, default_policy

CONFIG_PATH = "/etc/oamac/policy"
POLICY_MAP_IFACE = "bpf-map-update"

_SESSION_KINDS = {k.value: k for k in SessionKind}


@dataclass(frozen=True)
class Step:
    line: int
    text: str
    op: str
    args: tuple


@dataclass
class Scenario:
    steps: list[Step] = field(default_factory=list)


@dataclass(frozen=True)
class ScriptError:
    line: int
    message: str

    def __str__(self) -> str:
        return f"line {self.line}: {self.message}"


def parse_scenario(text: str) -> tuple[Scenario, list[ScriptError]]:
    """Parse a script, collecting every error with its line number."""
    steps: list[Step] = []
    errors: list[ScriptError] = []
    bound: set[str] = set()
    lines = text.splitlines()
    i = 0
    while i < len(lines):
        lineno = i + 1
        line = lines[i].split("#", 1)[0].strip()
        i += 1
        if not line:
            continue
        tokens = line.split()
        op = tokens[0]

        def err(message: str) -> None:
            errors.append(ScriptError(lineno, message))

        if op == "boot" and len(tokens) == 1:
            steps.append(Step(lineno, line, "boot", ()))
            bound.add("init")
        elif op == "ready" and len(tokens) == 1:
            steps.append(Step(lineno, line, "ready", ()))
        elif op == "session":
            parsed = _parse_session(tokens)
            if parsed is None:
                err(f"malformed session step: {line!r}")
            else:
                kind, tty, var = parsed
                steps.append(Step(lineno, line, "session", (kind, tty, var)))
                bound.add(var)
        elif op == "fork":
            if len(tokens) == 4 and tokens[2] == "->":
                if tokens[1] not in bound:
                    err(f"unbound variable: {tokens[1]!r}")
                else:
                    steps.append(Step(lineno, line, "fork", (tokens[1], tokens[3])))
                    bound.add(tokens[3])
            else:
                err(f"malformed fork step: {line!r}")
        elif op == "exec":
            parsed = _parse_exec(tokens)
            if parsed is None:
                err(f"malformed exec step: {line!r}")
            elif parsed[0] not in bound:
                err(f"unbound variable: {parsed[0]!r}")
            else:
                steps.append(Step(lineno, line, "exec", parsed))
        elif op == "exit":
            if len(tokens) == 2:
                if tokens[1] not in bound:
                    err(f"unbound variable: {tokens[1]!r}")
                else:
                    steps.append(Step(lineno, line, "exit", (tokens[1],)))
            else:
                err(f"malformed exit step: {line!r}")
        elif op in ("read", "write", "iface"):
            if len(tokens) == 5 and tokens[3] == "expect" and tokens[4] in ("allow", "deny"):
                if tokens[1] not in bound:
                    err(f"unbound variable: {tokens[1]!r}")
                else:
                    expect = Action.ALLOW if tokens[4] == "allow" else Action.DENY
                    steps.append(Step(lineno, line, op, (tokens[1], tokens[2], expect)))
            else:
                err(f"malformed assertion (want `{op} <var> <target> expect allow|deny`)")
        elif op == "policy":
            if len(tokens) == 2 and tokens[1] == "default":
                steps.append(Step(lineno, line, "policy-default", ()))
            elif len(tokens) == 2 and tokens[1] == "{":
                block: list[str] = []
                start = lineno
                closed = False
                while i < len(lines):
                    blk = lines[i].split("#", 1)[0].strip()
                    i += 1
                    if blk == "}":
                        closed = True
                        break
                    block.append(lines[i - 1])
                if not closed:
                    errors.append(ScriptError(start, "unterminated policy block"))
                    continue
                result = dsl.parse_policy("\n".join(block))
                for perr in result.errors:
                    errors.append(ScriptError(start + perr.line, perr.message))
                if result.ok:
                    steps.append(Step(start, "policy inline", "policy-inline", (result.document,)))
            else:
                err("policy step takes `default` or an inline `{ ... }` block")
        elif op == "rule":
            if len(tokens) >= 3 and tokens[1] == "add":
                rule, perr = dsl.parse_rule(" ".join(tokens[2:]), lineno)
                if perr is not None:
                    errors.append(ScriptError(lineno, perr.message))
                else:
                    steps.append(Step(lineno, line, "rule-add", (rule,)))
            elif len(tokens) == 3 and tokens[1] == "del" and tokens[2].isdigit():
                steps.append(Step(lineno, line, "rule-del", (int(tokens[2]),)))
            else:
                err(f"malformed rule step: {line!r}")
        elif op == "counters" and len(tokens) == 1:
            steps.append(Step(lineno, line, "counters", ()))
        else:
            err(f"unknown step: {line!r}")
    return Scenario(steps), errors


def _parse_session(tokens: list[str]):
    # session <kind> [tty <id>] -> <var>
    if len(tokens) < 4 or tokens[-2] != "->":
        return None
    kind = _SESSION_KINDS.get(tokens[1])
    if kind is None:
        return None
    middle = tokens[2:-2]
    if not middle:
        return kind, None, tokens[-1]
    if len(middle) == 2 and middle[0] == "tty":
        return kind, middle[1], tokens[-1]
    return None


def _parse_exec(tokens: list[str]):
    # exec <var> <image> [tty <id> | pty <id> [<session-kind>] | notty]
    if len(tokens) < 3:
        return None
    var, image, rest = tokens[1], tokens[2], tokens[3:]
    if not rest:
        return var, image, None
    if rest == ["notty"]:
        return var, image, TerminalAssociation.none()
    if len(rest) == 2 and rest[0] == "tty":
        return var, image, TerminalAssociation.console(rest[1])
    if rest[0] == "pty" and len(rest) in (2, 3):
        allocated = _SESSION_KINDS.get(rest[2]) if len(rest) == 3 else None
        if len(rest) == 3 and allocated is None:
            return None
        return var, image, TerminalAssociation.pty(rest[1], allocated)
    return None


def _session_terminal(kind: SessionKind, tty: str | None) -> TerminalAssociation:
    if tty is None:
        return TerminalAssociation.none()
    if kind is SessionKind.CONSOLE_LOGIN:
        return TerminalAssociation.console(tty)
    return TerminalAssociation.pty(tty, kind)


_OPERATOR_ENTRIES = {
    Origin.PHYSICAL: lambda: SessionEntry(
        SessionKind.CONSOLE_LOGIN, TerminalAssociation.console("op0")
    ),
    Origin.REMOTE: lambda: SessionEntry(
        SessionKind.REMOTE_LOGIN, TerminalAssociation.pty("op0", SessionKind.REMOTE_LOGIN)
    ),
    Origin.SERVICE: lambda: SessionEntry(SessionKind.SERVICE_START),
    Origin.CONTROL_PLANE: lambda: SessionEntry(
        SessionKind.CONTROL_PLANE_START,
        TerminalAssociation.pty("op0", SessionKind.CONTROL_PLANE_START),
    ),
    # A remote-login claim with no terminal is malformed and lands UNKNOWN.
    Origin.UNKNOWN: lambda: SessionEntry(SessionKind.REMOTE_LOGIN),
}


class ScriptRuntimeError(Exception):
    pass


@dataclass
class RunResult:
    transcript: str
    passed: int = 0
    failed: int = 0
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None and self.failed == 0


class ScenarioRunner:
    """Executes one scenario against a process table, store, and counters.

    The store and counters may be shared with a persistent engine (live
    mode); the process table is always scenario-local, created by the
    script's own `boot` step.
    """

    def __init__(
        self,
        store: PolicyStore | None = None,
        counters: AuditCounters | None = None,
        operator: Origin | None = None,
    ):
        self.store = store if store is not None else PolicyStore()
        self.counters = counters if counters is not None else AuditCounters()
        self.operator = operator
        self.table: ProcessTable | None = None
        self._vars: dict[str, int] = {}
        self._operator_pid: int | None = None

    def run(self, scenario: Scenario) -> RunResult:
        out: list[str] = []
        passed = failed = 0
        for step in scenario.steps:
            try:
                line, ok = self._step(step)
            except (KernelError, PathError, PolicyError, IndexError, ScriptRuntimeError) as exc:
                out.append(f"error: line {step.line}: {exc}")
                return RunResult("\n".join(out) + "\n", passed, failed, str(exc))
            out.extend(line)
            if ok is True:
                passed += 1
            elif ok is False:
                failed += 1
        total = passed + failed
        verdict = "PASS" if failed == 0 else "FAIL"
        out.append(f"result: {verdict} ({passed}/{total} assertions)")
        return RunResult("\n".join(out) + "\n", passed, failed, None)

    # Each step handler returns (transcript lines, assertion outcome):
    # True/False for assertions, None for everything else.

    def _step(self, step: Step):
        op = step.op
        if op == "boot":
            self.table = boot()
            self._vars = {"init": 1}
            return [f"{step.text}: pid 1 bootstrap"], None
        if self.table is None and op in ("ready", "session", "fork", "exec", "exit", "read", "write", "iface"):
            raise ScriptRuntimeError("no boot step before process events")
        if op == "ready":
            self.table.mark_ready()
            return [step.text], None
        if op == "session":
            kind, tty, var = step.args
            pid = self.table.session_entry(SessionEntry(kind, _session_terminal(kind, tty)))
            self._vars[var] = pid
            origin = self.table.origin_of(pid)
            return [f"{step.text}: pid {pid} {origin.value}"], None
        if op == "fork":
            src, dst = step.args
            pid = self.table.fork(self._pid(src))
            self._vars[dst] = pid
            origin = self.table.origin_of(pid)
            return [f"{step.text}: pid {pid} {origin.value}"], None
        if op == "exec":
            var, image, terminal = step.args
            rec = self.table.exec(self._pid(var), image, terminal)
            return [f"{step.text}: pid {rec.pid} {rec.origin.value}"], None
        if op == "exit":
            (var,) = step.args
            self.table.exit(self._pid(var))
            return [step.text], None
        if op in ("read", "write", "iface"):
            var, target, expect = step.args
            pid = self._pid(var)
            if op == "iface":
                decision = mediate_iface(self.table, self.store, self.counters, pid, target)
            else:
                mode = Mode.READ if op == "read" else Mode.WRITE
                decision = mediate_file(self.table, self.store, self.counters, pid, target, mode)
            ok = decision.action is expect
            verdict = "PASS" if ok else "FAIL"
            rendered = render_decision(decision)
            return (
                [f"{step.text.rsplit(' expect ', 1)[0]}: {rendered} [expect {expect.value}] {verdict}"],
                ok,
            )
        if op in ("policy-default", "policy-inline", "rule-add", "rule-del"):
            gate = self._operator_gate(step)
            if gate is not None:
                return gate, None
            if op == "policy-default":
                base = default_policy()
                version = self.store.install(base.rules, enforce_unknown=base.enforce_unknown)
            elif op == "policy-inline":
                (doc,) = step.args
                version = self.store.install(tuple(doc.rules), enforce_unknown=doc.enforce_unknown)
            elif op == "rule-add":
                (rule,) = step.args
                version = self.store.append_rule(rule)
            else:
                (index,) = step.args
                version = self.store.remove_rule(index)
            n = len(self.store.policy.rules)
            return [f"{step.text}: version {version} (rules: {n})"], None
        if op == "counters":
            lines = ["counters:"]
            lines.extend(f"  {p} {o} {a} {n}" for p, o, a, n in self.counters.snapshot())
            return lines, None
        raise ScriptRuntimeError(f"unhandled step: {op}")

    def _pid(self, var: str) -> int:
        pid = self._vars.get(var)
        if pid is None:
            raise ScriptRuntimeError(f"unbound variable: {var!r}")
        return pid

    def _operator_gate(self, step: Step) -> list[str] | None:
        """Mediate a policy edit as the operator before applying it.

        Editing the policy means writing its config path and updating the
        policy maps, so both must be allowed for the edit to proceed. Runs
        only when an operator origin was requested; the edit still applies
        during bootstrap, when pid 1 is the (exempt) operator.
        """
        if self.operator is None:
            return None
        if self.table is None:
            return None
        pid = self._operator_pid_for(self.operator)
        write = mediate_file(self.table, self.store, self.counters, pid, CONFIG_PATH, Mode.WRITE)
        update = mediate_iface(self.table, self.store, self.counters, pid, POLICY_MAP_IFACE)
        if write.allowed and update.allowed:
            return None
        blocked = write if not write.allowed else update
        return [
            f"{step.text}: {render_decision(blocked)} "
            f"operator={self.operator.value}, policy unchanged"
        ]

    def _operator_pid_for(self, origin: Origin) -> int:
        if not self.table.ready:
            return 1
        if self._operator_pid is None:
            self._operator_pid = self.table.session_entry(_OPERATOR_ENTRIES[origin]())
        return self._operator_pid


def run_text(
    text: str,
    store: PolicyStore | None = None,
    counters: AuditCounters | None = None,
    operator: Origin | None = None,
) -> tuple[RunResult | None, list[ScriptError]]:
    """Parse and run a script; parse errors preclude running."""
    scenario, errors = parse_scenario(text)
    if errors:
        return None, errors
    runner = ScenarioRunner(store=store, counters=counters, operator=operator)
    return runner.run(scenario), []
