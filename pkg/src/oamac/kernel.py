"""Simulated kernel process table with execution-origin tracking.

Every process carries an origin label describing how execution entered the
system: at the physical console, over a remote login, as a background service,
via a cloud control-plane agent, during early boot, or unknown. Origins are
assigned when a session is established, inherited across fork, and sticky
across exec: once a process has a definite origin it never changes, which is
what prevents a compromised remote shell from laundering itself into a
"local" one by re-executing with a forged terminal claim. Only processes
whose origin is UNKNOWN may be reclassified at exec, from the terminal the
kernel observes at that moment.

The table models the minimum needed to reason about origins: pid 1 exists
from boot with the BOOTSTRAP origin, a one-way ready flag closes the
bootstrap phase, sessions enter as children of pid 1, and exited processes
remain as tombstones so ancestry stays reconstructible.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum


class Origin(Enum):
    """Execution-provenance label attached to every process."""

    BOOTSTRAP = "bootstrap"
    PHYSICAL = "physical"
    REMOTE = "remote"
    SERVICE = "service"
    CONTROL_PLANE = "control-plane"
    UNKNOWN = "unknown"


# Fixed enumeration order for rule rendering; BOOTSTRAP is structurally
# excluded from policy origin sets and therefore absent here.
POLICY_ORIGINS: tuple[Origin, ...] = (
    Origin.PHYSICAL,
    Origin.REMOTE,
    Origin.SERVICE,
    Origin.CONTROL_PLANE,
    Origin.UNKNOWN,
)


class TerminalKind(Enum):
    NONE = "none"
    PHYSICAL_CONSOLE = "physical-console"
    PSEUDO_TERMINAL = "pseudo-terminal"


class SessionKind(Enum):
    CONSOLE_LOGIN = "console-login"
    REMOTE_LOGIN = "remote-login"
    SERVICE_START = "service-start"
    CONTROL_PLANE_START = "control-plane-start"


@dataclass(frozen=True)
class TerminalAssociation:
    """A process's controlling-terminal state.

    Well-formedness: kind NONE carries neither id nor allocator; a physical
    console carries an id; a pseudo-terminal carries both an id and the
    session kind that allocated it.
    """

    kind: TerminalKind = TerminalKind.NONE
    terminal_id: str | None = None
    allocated_by: SessionKind | None = None

    @classmethod
    def none(cls) -> TerminalAssociation:
        return cls(TerminalKind.NONE)

    @classmethod
    def console(cls, terminal_id: str) -> TerminalAssociation:
        return cls(TerminalKind.PHYSICAL_CONSOLE, terminal_id)

    @classmethod
    def pty(cls, terminal_id: str, allocated_by: SessionKind | None) -> TerminalAssociation:
        return cls(TerminalKind.PSEUDO_TERMINAL, terminal_id, allocated_by)

    def is_well_formed(self) -> bool:
        if self.kind is TerminalKind.NONE:
            return self.terminal_id is None and self.allocated_by is None
        if self.terminal_id is None:
            return False
        if self.kind is TerminalKind.PSEUDO_TERMINAL:
            return self.allocated_by is not None
        return True

    def to_dict(self) -> dict:
        out: dict = {"kind": self.kind.value}
        if self.terminal_id is not None:
            out["terminal_id"] = self.terminal_id
        if self.allocated_by is not None:
            out["allocated_by"] = self.allocated_by.value
        return out


NO_TERMINAL = TerminalAssociation.none()


@dataclass(frozen=True)
class SessionEntry:
    """How a new session claims to have entered the system."""

    kind: SessionKind
    terminal: TerminalAssociation = NO_TERMINAL

    def is_well_formed(self) -> bool:
        if not self.terminal.is_well_formed():
            return False
        if self.kind is SessionKind.CONSOLE_LOGIN:
            return self.terminal.kind is TerminalKind.PHYSICAL_CONSOLE
        if self.kind is SessionKind.REMOTE_LOGIN:
            return self.terminal.kind is TerminalKind.PSEUDO_TERMINAL
        if self.kind is SessionKind.SERVICE_START:
            return self.terminal.kind is TerminalKind.NONE
        # Control-plane agents may or may not hold a terminal; any
        # well-formed association is acceptable.
        return True


_SESSION_ORIGIN = {
    SessionKind.CONSOLE_LOGIN: Origin.PHYSICAL,
    SessionKind.REMOTE_LOGIN: Origin.REMOTE,
    SessionKind.SERVICE_START: Origin.SERVICE,
    SessionKind.CONTROL_PLANE_START: Origin.CONTROL_PLANE,
}


def classify(entry: SessionEntry) -> Origin:
    """Map a session entry to an origin; malformed entries go to UNKNOWN.

    Pure and total: a session claim that violates its own invariants (a
    remote login without a pseudo-terminal, a service start holding a
    terminal, a pty with no allocator) is never trusted and never crashes
    the classifier.
    """
    if not entry.is_well_formed():
        return Origin.UNKNOWN
    return _SESSION_ORIGIN[entry.kind]


class KernelError(Exception):
    """Base for process-table failures."""


class AlreadyReadyError(KernelError):
    """mark_ready called twice; signals a scenario-script bug."""


class NotReadyError(KernelError):
    """Session entry attempted before the system left the bootstrap phase."""


class NoSuchProcessError(KernelError):
    pass


class DeadProcessError(KernelError):
    pass


class BootstrapClosedError(KernelError):
    """No process may acquire BOOTSTRAP once the system is ready."""


ROOT_PID = 1
_NON_PHYSICAL_SESSIONS = frozenset(
    {Origin.REMOTE, Origin.SERVICE, Origin.CONTROL_PLANE}
)


@dataclass
class ProcessRecord:
    pid: int
    ppid: int
    origin: Origin
    terminal: TerminalAssociation
    image: str
    alive: bool = True

    def to_dict(self) -> dict:
        return {
            "pid": self.pid,
            "ppid": self.ppid,
            "origin": self.origin.value,
            "terminal": self.terminal.to_dict(),
            "image": self.image,
            "alive": self.alive,
        }


class ProcessTable:
    """Process records plus the one-way bootstrap-ready flag.

    Construct via :func:`boot`. All mutating operations validate their
    preconditions and raise :class:`KernelError` subclasses on misuse;
    the table is never left half-updated.
    """

    def __init__(self) -> None:
        self._procs: dict[int, ProcessRecord] = {}
        self._next_pid = ROOT_PID
        self._ready = False

    @property
    def ready(self) -> bool:
        return self._ready

    def pids(self) -> list[int]:
        return sorted(self._procs)

    def get(self, pid: int) -> ProcessRecord:
        rec = self._procs.get(pid)
        if rec is None:
            raise NoSuchProcessError(f"no such pid: {pid}")
        return rec

    def alive_record(self, pid: int) -> ProcessRecord:
        rec = self.get(pid)
        if not rec.alive:
            raise DeadProcessError(f"pid {pid} has exited")
        return rec

    def origin_of(self, pid: int) -> Origin:
        return self.get(pid).origin

    def _spawn(self, ppid: int, origin: Origin, terminal: TerminalAssociation, image: str) -> int:
        if self._ready and origin is Origin.BOOTSTRAP:
            raise BootstrapClosedError("bootstrap origin is closed after ready")
        pid = self._next_pid
        self._next_pid += 1
        self._procs[pid] = ProcessRecord(pid, ppid, origin, terminal, image)
        return pid

    def mark_ready(self) -> None:
        """Close the bootstrap phase. One-way; a second call is an error."""
        if self._ready:
            raise AlreadyReadyError("system already marked ready")
        self._ready = True

    def session_entry(self, entry: SessionEntry) -> int:
        """Admit a new session as a child of pid 1 and classify its origin."""
        if not self._ready:
            raise NotReadyError("session entry before ready")
        origin = classify(entry)
        return self._spawn(ROOT_PID, origin, entry.terminal, entry.kind.value)

    def fork(self, parent: int) -> int:
        """Create a child inheriting the parent's origin and terminal."""
        rec = self.alive_record(parent)
        if self._ready and rec.origin is Origin.BOOTSTRAP:
            # Post-ready children of bootstrap tasks must enter through
            # session_entry so they receive a classified origin.
            raise BootstrapClosedError(
                f"fork from bootstrap pid {parent} after ready; use a session entry"
            )
        return self._spawn(parent, rec.origin, rec.terminal, rec.image)

    def exec(self, pid: int, image: str, observed_terminal: TerminalAssociation | None = None) -> ProcessRecord:
        """Replace the process image; reclassify only from UNKNOWN.

        A definite origin is sticky: exec never upgrades or downgrades it,
        regardless of what terminal the event claims. An UNKNOWN process is
        reclassified from the terminal observed at exec time (its own
        terminal if the event carries none), via a synthetic session entry:
        no terminal reads as a service start, a physical console as a
        console login, and a pseudo-terminal as whatever session kind
        allocated it. A physical claim that contradicts a remote, service,
        or control-plane parent is rejected and the process stays UNKNOWN.
        """
        rec = self.alive_record(pid)
        rec.image = image
        if rec.origin is not Origin.UNKNOWN:
            return rec
        term = rec.terminal if observed_terminal is None else observed_terminal
        origin = classify(_synthetic_entry(term))
        if origin is Origin.PHYSICAL:
            parent = self._procs.get(rec.ppid)
            if parent is not None and parent.origin in _NON_PHYSICAL_SESSIONS:
                origin = Origin.UNKNOWN
        rec.origin = origin
        return rec

    def exit(self, pid: int) -> None:
        """Mark a process dead. Its record is retained as a tombstone."""
        if pid == ROOT_PID:
            raise KernelError("pid 1 never exits")
        rec = self.alive_record(pid)
        rec.alive = False

    def serialize(self) -> str:
        """Canonical JSON form; equal tables serialize identically."""
        doc = {
            "ready": self._ready,
            "next_pid": self._next_pid,
            "processes": [self._procs[pid].to_dict() for pid in sorted(self._procs)],
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def _synthetic_entry(term: TerminalAssociation) -> SessionEntry:
    if term.kind is TerminalKind.PHYSICAL_CONSOLE:
        return SessionEntry(SessionKind.CONSOLE_LOGIN, term)
    if term.kind is TerminalKind.PSEUDO_TERMINAL:
        # A pty with no allocator is malformed and classifies UNKNOWN
        # whichever kind we pick here.
        kind = term.allocated_by or SessionKind.REMOTE_LOGIN
        return SessionEntry(kind, term)
    return SessionEntry(SessionKind.SERVICE_START, term)


def boot() -> ProcessTable:
    """Fresh table holding only pid 1 with the BOOTSTRAP origin."""
    table = ProcessTable()
    table._spawn(0, Origin.BOOTSTRAP, NO_TERMINAL, "init")
    return table
