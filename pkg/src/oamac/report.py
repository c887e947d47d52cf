"""Render engine state as delimited tables plus matplotlib figures.

Writes four files into an output directory: counters.tsv and
reachability.tsv (tab-delimited, stable row order, suitable for diffing
or downstream tooling) and counters.png and reachability.png (a grouped
bar chart of decisions per mediation point and an allow/deny matrix of
origins against probes). Figures always go to files; nothing is displayed.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
from matplotlib.colors import ListedColormap

from .analyzer import default_probes, reachability
from .kernel import POLICY_ORIGINS, Origin
from .policy import Action, AuditCounters, Policy

REPORT_ORIGINS = tuple(o for o in POLICY_ORIGINS if o is not Origin.UNKNOWN)


def write_counters_tsv(counters: AuditCounters, path: Path) -> None:
    lines = ["mediation_point\torigin\taction\tcount"]
    lines.extend(f"{p}\t{o}\t{a}\t{n}" for p, o, a, n in counters.snapshot())
    path.write_text("\n".join(lines) + "\n")


def write_reachability_tsv(rows, origins, path: Path) -> None:
    lines = ["probe\t" + "\t".join(o.value for o in origins)]
    for label, cells in rows:
        lines.append(label + "\t" + "\t".join(cells[o].value for o in origins))
    path.write_text("\n".join(lines) + "\n")


def plot_counters(counters: AuditCounters, path: Path) -> None:
    snapshot = counters.snapshot()
    points = sorted({row[0] for row in snapshot})
    allows = []
    denies = []
    for point in points:
        allows.append(sum(n for p, _o, a, n in snapshot if p == point and a == "allow"))
        denies.append(sum(n for p, _o, a, n in snapshot if p == point and a == "deny"))
    fig, ax = plt.subplots(figsize=(max(4.0, 1.2 * len(points) + 2), 3.5))
    xs = range(len(points))
    width = 0.38
    ax.bar([x - width / 2 for x in xs], allows, width, label="allow", color="#4c9f70")
    ax.bar([x + width / 2 for x in xs], denies, width, label="deny", color="#b5484d")
    ax.set_xticks(list(xs))
    ax.set_xticklabels(points, rotation=30, ha="right")
    ax.set_ylabel("decisions")
    ax.set_title("audit counters by mediation point")
    if points:
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_reachability(rows, origins, path: Path) -> None:
    labels = [label for label, _ in rows]
    grid = [
        [1 if cells[o] is Action.ALLOW else 0 for o in origins] for _label, cells in rows
    ]
    height = max(2.5, 0.4 * len(labels) + 1.5)
    fig, ax = plt.subplots(figsize=(1.4 * len(origins) + 3, height))
    cmap = ListedColormap(["#b5484d", "#4c9f70"])
    if grid:
        ax.imshow(grid, cmap=cmap, vmin=0, vmax=1, aspect="auto")
    ax.set_xticks(range(len(origins)))
    ax.set_xticklabels([o.value for o in origins], rotation=30, ha="right")
    ax.set_yticks(range(len(labels)))
    ax.set_yticklabels(labels)
    ax.set_title("reachability (green allow, red deny)")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_report(
    policy: Policy,
    counters: AuditCounters,
    out_dir: Path,
    origins=REPORT_ORIGINS,
) -> list[Path]:
    """Write all four report files and return their paths."""
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = reachability(policy, origins, default_probes(policy))
    written = []
    for name, writer in (
        ("counters.tsv", lambda p: write_counters_tsv(counters, p)),
        ("reachability.tsv", lambda p: write_reachability_tsv(rows, origins, p)),
        ("counters.png", lambda p: plot_counters(counters, p)),
        ("reachability.png", lambda p: plot_reachability(rows, origins, p)),
    ):
        target = out_dir / name
        writer(target)
        written.append(target)
    return written
