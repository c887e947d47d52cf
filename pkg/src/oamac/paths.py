"""Canonical absolute paths and component-boundary prefix matching."""

from __future__ import annotations


class PathError(ValueError):
    pass


def normalize_path(raw: str) -> str:
    """Collapse a raw absolute path to canonical form.

    Repeated slashes and "." segments drop out; ".." pops one segment and
    clamps at the root. Relative paths are rejected, never guessed at.
    """
    if not raw or not raw.startswith("/"):
        raise PathError(f"path must be absolute: {raw!r}")
    parts: list[str] = []
    for seg in raw.split("/"):
        if seg == "" or seg == ".":
            continue
        if seg == "..":
            if parts:
                parts.pop()
            continue
        parts.append(seg)
    return "/" + "/".join(parts)


def path_components(path: str) -> tuple[str, ...]:
    return tuple(seg for seg in path.split("/") if seg)


def prefix_match(pattern: str, path: str) -> bool:
    """True when pattern's components are a prefix of path's components.

    Matching is per component, not per byte: /sys covers /sys/kernel but
    never /system. Both arguments must already be canonical. The root
    pattern "/" covers every path; matching is reflexive.
    """
    if pattern == "/":
        return True
    return path == pattern or path.startswith(pattern + "/")
