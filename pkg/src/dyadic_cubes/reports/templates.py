"""Markdown rendering for verification reports and energy tables."""

from __future__ import annotations

import math
import platform
from typing import Any

import psutil

from dyadic_cubes.energy import ArcEstimate, DecayProfile
from dyadic_cubes.testing.verifier import Report


def _fmt(value: Any) -> str:
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return f"{value:.6g}"
    return str(value)


def render_report_md(report: Report, max_witnesses: int = 5) -> str:
    """Render one check family as markdown."""
    status = "PASS" if report.passed else "FAIL"
    lines = [
        f"## {report.family}: {status}",
        "",
        "| check | result | message |",
        "|---|---|---|",
    ]
    for c in report.checks:
        lines.append(f"| {c.name} | {'ok' if c.passed else 'FAILED'} | {c.message} |")
    lines.append("")

    if report.certificates:
        lines.append("### Certificates")
        for k, v in report.certificates.items():
            lines.append(f"- **{k}**: {_fmt(v)}")
        lines.append("")

    for c in report.failed:
        witnesses = (c.details or {}).get("witnesses", [])
        if not witnesses:
            continue
        lines.append(f"### {c.name} witnesses")
        for w in witnesses[:max_witnesses]:
            lines.append(f"- `{w}`")
        lines.append("")

    return "\n".join(lines)


def render_summary_md(
    title: str,
    reports: list[Report],
    environment: dict[str, Any],
) -> str:
    lines = [f"# {title}", ""]
    passed = sum(r.passed for r in reports)
    lines.append(f"{passed} of {len(reports)} check families pass.")
    lines.append("")
    for r in reports:
        lines.append(render_report_md(r))
    lines.append("## Environment")
    for k, v in environment.items():
        lines.append(f"- **{k}**: {v}")
    lines.append("")
    return "\n".join(lines)


def render_energy_table(profiles: list[DecayProfile]) -> str:
    """One row per (p, k): sup_w E, then the fitted slope and verdict for that p."""
    lines = [
        "| p | k | sup E | slope | verdict |",
        "|---|---|---|---|---|",
    ]
    for prof in sorted(profiles, key=lambda pr: pr.p):
        for k, value in sorted(prof.table.items()):
            lines.append(
                f"| {prof.p:.4g} | {k} | {_fmt(value)} | {_fmt(prof.slope)} | {prof.verdict} |"
            )
    return "\n".join(lines)


def render_estimate_md(estimate: ArcEstimate) -> str:
    lines = [
        "# Conformal dimension estimate",
        "",
        f"- **estimate**: {estimate.summary}",
        f"- **M**: {estimate.M}",
        f"- **bracket**: [{_fmt(estimate.p_low)}, {_fmt(estimate.p_high)}]",
    ]
    if estimate.floor:
        lines.append("- **note**: every tested p decays; the bracket is the p > 1 floor")
    if estimate.ceiling:
        lines.append("- **note**: no tested p decays; the dimension exceeds the search range")
    lines.extend(["", render_energy_table(estimate.profiles), ""])
    return "\n".join(lines)


def default_environment() -> dict[str, Any]:
    """Gather default environment info."""
    mem = psutil.virtual_memory()
    return {
        "OS": f"{platform.system()} {platform.release()}",
        "Machine": platform.machine(),
        "Python": platform.python_version(),
        "CPUs": f"{psutil.cpu_count(logical=False) or 1} physical / {psutil.cpu_count() or 1} logical",
        "Memory": f"{mem.total / 2**30:.1f} GiB",
    }
