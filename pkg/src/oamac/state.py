"""Persistent engine state: one JSON file, advisory-locked.

The control tool keeps its policy (stored as canonical policy-language
text so the on-disk form is the same thing `show` prints), the version
counter, and the audit counters in a single state file under the config
directory. The directory defaults to ~/.config/oamac and is overridden
with the OAMAC_CONFIG_DIR environment variable, which is what the tests
use to stay hermetic.

Concurrent invocations serialize on an exclusive flock over a sibling
lock file for the whole read-modify-write span.
"""

from __future__ import annotations

import fcntl
import json
import os
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path

from . import dsl
from .policy import AuditCounters, Policy, PolicyStore

ENV_CONFIG_DIR = "OAMAC_CONFIG_DIR"
STATE_FILE = "state.json"
LOCK_FILE = ".state.lock"


def config_dir() -> Path:
    override = os.environ.get(ENV_CONFIG_DIR)
    if override:
        return Path(override)
    return Path.home() / ".config" / "oamac"


@dataclass
class EngineState:
    store: PolicyStore
    counters: AuditCounters

    @classmethod
    def fresh(cls) -> EngineState:
        return cls(PolicyStore(), AuditCounters())


def load_state(directory: Path | None = None) -> EngineState:
    directory = directory or config_dir()
    path = directory / STATE_FILE
    if not path.exists():
        return EngineState.fresh()
    doc = json.loads(path.read_text())
    result = dsl.parse_policy(doc["policy"])
    if not result.ok:
        problems = "; ".join(str(e) for e in result.errors)
        raise StateError(f"corrupt state file {path}: {problems}")
    policy = Policy(
        rules=tuple(result.document.rules),
        enforce_unknown=result.document.enforce_unknown,
        version=int(doc["version"]),
    )
    counters = AuditCounters()
    counters.load_rows(doc.get("counters", []))
    return EngineState(PolicyStore(policy), counters)


def save_state(state: EngineState, directory: Path | None = None) -> Path:
    directory = directory or config_dir()
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / STATE_FILE
    doc = {
        "version": state.store.version,
        "policy": dsl.format_policy(state.store.policy),
        "counters": state.counters.snapshot(),
    }
    tmp = path.with_suffix(".json.tmp")
    tmp.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    tmp.replace(path)
    return path


def clear_state(directory: Path | None = None) -> None:
    directory = directory or config_dir()
    path = directory / STATE_FILE
    if path.exists():
        path.unlink()


@contextmanager
def locked(directory: Path | None = None):
    """Exclusive advisory lock held for a whole read-modify-write."""
    directory = directory or config_dir()
    directory.mkdir(parents=True, exist_ok=True)
    lock_path = directory / LOCK_FILE
    with open(lock_path, "w") as fh:
        fcntl.flock(fh, fcntl.LOCK_EX)
        try:
            yield
        finally:
            fcntl.flock(fh, fcntl.LOCK_UN)


class StateError(RuntimeError):
    pass
