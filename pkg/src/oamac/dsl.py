"""Line-oriented policy language: parse, validate, and canonically render.

    # comment; blank lines ignored
    rule      := ("path" ABSPATH | "iface" IFACE) ("allow" | "deny")
                 origin ("," origin)* [ "read" | "write" ]
    origin    := "physical" | "remote" | "service" | "control-plane" | "unknown"
    directive := "enforce-unknown" ("on" | "off")

Parsing collects every error instead of stopping at the first: a ten-rule
file with one typo still yields nine usable rules plus one diagnostic
carrying its line number. "bootstrap" is not a valid origin anywhere; the
boot exemption is structural, not configurable. Paths are normalized at
parse time so everything downstream sees canonical patterns.

Rendering is canonical: one rule per line in order, origins joined by
commas in fixed enumeration order, the mode emitted only when it narrows,
and the enforce-unknown directive emitted only when switched on. A
formatted document reparses to an equal document.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .kernel import Origin, POLICY_ORIGINS
from .paths import PathError, normalize_path
from .policy import IFACE_NAME_RE, Action, Mode, Policy, PolicyRule, RuleKind

_ORIGIN_BY_NAME = {o.value: o for o in POLICY_ORIGINS}
_ORIGIN_RANK = {o: i for i, o in enumerate(POLICY_ORIGINS)}
_MODE_BY_NAME = {"read": Mode.READ, "write": Mode.WRITE}
_ACTION_BY_NAME = {"allow": Action.ALLOW, "deny": Action.DENY}


class ErrorKind(Enum):
    RELATIVE_PATH = "relative-path"
    UNKNOWN_KEYWORD = "unknown-keyword"
    EMPTY_ORIGINS = "empty-origins"
    BOOTSTRAP_ORIGIN = "bootstrap-origin"
    MALFORMED = "malformed"


@dataclass(frozen=True)
class ParseError:
    line: int
    kind: ErrorKind
    message: str

    def __str__(self) -> str:
        return f"line {self.line}: {self.message}"


@dataclass
class PolicyDocument:
    """Parsed rules in file order plus the enforce-unknown toggle.

    `source_lines` maps each rule to the 1-based line it came from; it is
    diagnostic metadata and excluded from equality so round-tripping
    through the canonical rendering compares equal.
    """

    rules: list[PolicyRule] = field(default_factory=list)
    enforce_unknown: bool = False
    source_lines: list[int] = field(default_factory=list, compare=False)


@dataclass
class ParseResult:
    document: PolicyDocument
    errors: list[ParseError]

    @property
    def ok(self) -> bool:
        return not self.errors


def parse_policy(text: str) -> ParseResult:
    doc = PolicyDocument()
    errors: list[ParseError] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        head = tokens[0]
        if head in ("path", "iface"):
            rule, err = _parse_rule_tokens(tokens, lineno)
            if err is not None:
                errors.append(err)
            else:
                doc.rules.append(rule)
                doc.source_lines.append(lineno)
        elif head == "enforce-unknown":
            err = _parse_directive(tokens, lineno, doc)
            if err is not None:
                errors.append(err)
        else:
            errors.append(
                ParseError(lineno, ErrorKind.UNKNOWN_KEYWORD, f"unknown keyword: {head!r}")
            )
    return ParseResult(doc, errors)


def parse_rule(text: str, lineno: int = 1) -> tuple[PolicyRule | None, ParseError | None]:
    """Parse a single rule statement (the CLI's `add` argument)."""
    tokens = text.split()
    if not tokens or tokens[0] not in ("path", "iface"):
        return None, ParseError(
            lineno, ErrorKind.UNKNOWN_KEYWORD, "rule must start with 'path' or 'iface'"
        )
    return _parse_rule_tokens(tokens, lineno)


def _parse_rule_tokens(tokens: list[str], lineno: int):
    kind = RuleKind.PATH if tokens[0] == "path" else RuleKind.IFACE

    def bad(kind_: ErrorKind, msg: str):
        return None, ParseError(lineno, kind_, msg)

    if len(tokens) < 3:
        return bad(ErrorKind.MALFORMED, "rule needs a pattern and an action")
    pattern, action_tok = tokens[1], tokens[2]

    if kind is RuleKind.PATH:
        if not pattern.startswith("/"):
            return bad(ErrorKind.RELATIVE_PATH, f"path must be absolute: {pattern!r}")
        try:
            pattern = normalize_path(pattern)
        except PathError as exc:
            return bad(ErrorKind.RELATIVE_PATH, str(exc))
    elif not IFACE_NAME_RE.match(pattern):
        return bad(ErrorKind.MALFORMED, f"bad interface name: {pattern!r}")

    action = _ACTION_BY_NAME.get(action_tok)
    if action is None:
        return bad(ErrorKind.UNKNOWN_KEYWORD, f"unknown action: {action_tok!r}")

    if len(tokens) < 4 or tokens[3] in _MODE_BY_NAME:
        return bad(ErrorKind.EMPTY_ORIGINS, "rule lists no origins")
    origins: set[Origin] = set()
    for name in tokens[3].split(","):
        if name == "":
            return bad(ErrorKind.MALFORMED, "empty origin name in list")
        if name == "bootstrap":
            return bad(
                ErrorKind.BOOTSTRAP_ORIGIN, "bootstrap is exempt by construction, not by rule"
            )
        origin = _ORIGIN_BY_NAME.get(name)
        if origin is None:
            return bad(ErrorKind.UNKNOWN_KEYWORD, f"unknown origin: {name!r}")
        origins.add(origin)

    mode = Mode.ANY
    if len(tokens) >= 5:
        mode = _MODE_BY_NAME.get(tokens[4])
        if mode is None:
            return bad(ErrorKind.UNKNOWN_KEYWORD, f"unknown mode: {tokens[4]!r}")
    if len(tokens) > 5:
        return bad(ErrorKind.MALFORMED, f"trailing tokens after mode: {' '.join(tokens[5:])!r}")

    return PolicyRule(kind, pattern, action, frozenset(origins), mode), None


def _parse_directive(tokens: list[str], lineno: int, doc: PolicyDocument) -> ParseError | None:
    if len(tokens) != 2 or tokens[1] not in ("on", "off"):
        return ParseError(
            lineno, ErrorKind.MALFORMED, "enforce-unknown takes exactly one of: on, off"
        )
    doc.enforce_unknown = tokens[1] == "on"
    return None


def format_rule(rule: PolicyRule) -> str:
    origins = ",".join(o.value for o in sorted(rule.origins, key=_ORIGIN_RANK.__getitem__))
    text = f"{rule.kind.value} {rule.pattern} {rule.action.value} {origins}"
    if rule.mode is not Mode.ANY:
        text += f" {rule.mode.value}"
    return text


def format_policy(doc: PolicyDocument | Policy) -> str:
    """Canonical text for a document or an installed policy."""
    lines = [format_rule(rule) for rule in doc.rules]
    if doc.enforce_unknown:
        lines.append("enforce-unknown on")
    return "\n".join(lines) + ("\n" if lines else "")


def document_of(policy: Policy) -> PolicyDocument:
    return PolicyDocument(rules=list(policy.rules), enforce_unknown=policy.enforce_unknown)
