"""oamacctl: inspect and edit the origin policy, lint it, run scenarios.

Usage:
    oamacctl load <file>            install a policy file (whole-file, atomic)
    oamacctl show [-n]              print the active policy in canonical form
    oamacctl add <rule text>        append one rule
    oamacctl del <index>            remove the rule at a 0-based index
    oamacctl counters               print the audit counter table
    oamacctl analyze <file>         lint a policy file; notes don't fail it
    oamacctl run <scenario> [--live] [--as ORIGIN]
    oamacctl reset                  discard persisted policy and counters
    oamacctl report [--out DIR]     write TSV tables and PNG figures

Exit codes: 0 success; 1 usage, parse, or state errors; 2 lint findings
or scenario assertion failures.

Engine state (policy, version, counters) persists across invocations in
a single locked state file under the config directory (override with
OAMAC_CONFIG_DIR). Scenario runs are isolated from that state unless
--live is given; --as mediates the scenario's own policy edits as the
given origin, for adversarial self-tests.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import analyzer, dsl, scenario, state
from .kernel import POLICY_ORIGINS
from .policy import Policy, PolicyError, render_counters

_ORIGIN_CHOICES = {o.value: o for o in POLICY_ORIGINS}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1, not argparse's default 2
        raise UsageError(message)


def build_parser() -> _Parser:
    parser = _Parser(prog="oamacctl", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("load", help="install a policy file")
    p.add_argument("file", type=Path)

    p = sub.add_parser("show", help="print the active policy")
    p.add_argument("-n", "--numbered", action="store_true", help="prefix rule indexes")

    p = sub.add_parser("add", help="append one rule")
    p.add_argument("rule", nargs="+", help="rule text, e.g. path /sys deny remote")

    p = sub.add_parser("del", help="remove the rule at an index")
    p.add_argument("index", type=int)

    sub.add_parser("counters", help="print the audit counter table")

    p = sub.add_parser("analyze", help="lint a policy file")
    p.add_argument("file", type=Path)

    p = sub.add_parser("run", help="run a scenario script")
    p.add_argument("scenario", type=Path)
    p.add_argument("--live", action="store_true", help="run against persisted state")
    p.add_argument("--as", dest="operator", choices=sorted(_ORIGIN_CHOICES), default=None,
                   help="mediate the scenario's policy edits as this origin")

    sub.add_parser("reset", help="discard persisted state")

    p = sub.add_parser("report", help="write TSV and PNG reports")
    p.add_argument("--out", type=Path, default=Path("oamac-report"))

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"oamacctl: {exc}", file=sys.stderr)
        return 1
    handler = _HANDLERS[args.command]
    try:
        return handler(args)
    except (OSError, state.StateError) as exc:
        print(f"oamacctl: {exc}", file=sys.stderr)
        return 1


def entry() -> None:
    raise SystemExit(main())


def _cmd_load(args) -> int:
    result = dsl.parse_policy(args.file.read_text())
    if not result.ok:
        for err in result.errors:
            print(f"{args.file}:{err}", file=sys.stderr)
        return 1
    doc = result.document
    with state.locked():
        engine = state.load_state()
        try:
            version = engine.store.install(tuple(doc.rules), enforce_unknown=doc.enforce_unknown)
        except PolicyError as exc:
            print(f"oamacctl: {exc}", file=sys.stderr)
            return 1
        state.save_state(engine)
    print(f"installed version {version} ({len(doc.rules)} rules)")
    return 0


def _cmd_show(args) -> int:
    engine = state.load_state()
    policy = engine.store.policy
    if args.numbered:
        for idx, rule in enumerate(policy.rules):
            print(f"{idx}: {dsl.format_rule(rule)}")
        if policy.enforce_unknown:
            print("enforce-unknown on")
    else:
        sys.stdout.write(dsl.format_policy(policy))
    return 0


def _cmd_add(args) -> int:
    rule, err = dsl.parse_rule(" ".join(args.rule))
    if err is not None:
        print(f"oamacctl: {err.message}", file=sys.stderr)
        return 1
    with state.locked():
        engine = state.load_state()
        try:
            version = engine.store.append_rule(rule)
        except PolicyError as exc:
            print(f"oamacctl: {exc}", file=sys.stderr)
            return 1
        state.save_state(engine)
    print(f"version {version}")
    return 0


def _cmd_del(args) -> int:
    with state.locked():
        engine = state.load_state()
        try:
            version = engine.store.remove_rule(args.index)
        except IndexError as exc:
            print(f"oamacctl: {exc}", file=sys.stderr)
            return 1
        state.save_state(engine)
    print(f"version {version}")
    return 0


def _cmd_counters(args) -> int:
    engine = state.load_state()
    sys.stdout.write(render_counters(engine.counters))
    return 0


def _cmd_analyze(args) -> int:
    result = dsl.parse_policy(args.file.read_text())
    if not result.ok:
        for err in result.errors:
            print(f"{args.file}:{err}", file=sys.stderr)
        return 1
    doc = result.document
    policy = Policy(rules=tuple(doc.rules), enforce_unknown=doc.enforce_unknown)
    findings = analyzer.lint(policy)
    sys.stdout.write(analyzer.render_findings(findings, doc.source_lines))
    notes = analyzer.check_order_conflicts(policy)
    for line in analyzer.render_findings(notes, doc.source_lines).splitlines():
        print(f"note: {line}")
    if findings:
        return 2
    print("no findings")
    return 0


def _cmd_run(args) -> int:
    text = args.scenario.read_text()
    operator = _ORIGIN_CHOICES[args.operator] if args.operator else None
    if args.live:
        with state.locked():
            engine = state.load_state()
            result, errors = scenario.run_text(
                text, store=engine.store, counters=engine.counters, operator=operator
            )
            if result is not None:
                state.save_state(engine)
    else:
        result, errors = scenario.run_text(text, operator=operator)
    if errors:
        for err in errors:
            print(f"{args.scenario}:{err}", file=sys.stderr)
        return 1
    sys.stdout.write(result.transcript)
    if result.error is not None:
        return 1
    return 0 if result.failed == 0 else 2


def _cmd_reset(args) -> int:
    with state.locked():
        state.clear_state()
    print("state cleared")
    return 0


def _cmd_report(args) -> int:
    from . import report  # defers the matplotlib import to the one command needing it

    engine = state.load_state()
    written = report.write_report(engine.store.policy, engine.counters, args.out)
    for path in written:
        print(path)
    return 0


_HANDLERS = {
    "load": _cmd_load,
    "show": _cmd_show,
    "add": _cmd_add,
    "del": _cmd_del,
    "counters": _cmd_counters,
    "analyze": _cmd_analyze,
    "run": _cmd_run,
    "reset": _cmd_reset,
    "report": _cmd_report,
}
