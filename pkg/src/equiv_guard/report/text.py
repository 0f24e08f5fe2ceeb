"""
report.text - Grep-friendly text output.

One line per finding:

    CCRA<TAB>contracts/fig4.sol:21<TAB>Confirmed<TAB>message
"""

from typing import List

from equiv_guard.models import Diagnostic
from equiv_guard.report.metrics import format_ratio
from equiv_guard.report.models import EvalStats, Report


def finding_lines(report: Report) -> List[str]:
    return [f"{f.smell.value}\t{f.file}:{f.line}\t{f.confidence.value}\t{f.message}" for f in report.findings]


def _diagnostic_line(d: Diagnostic) -> str:
    where = f" {d.contract}" if d.contract else ""
    return f"# {d.phase}/{d.code}{where}: {d.message}"


def render_text(report: Report, with_diagnostics: bool = False) -> str:
    lines = finding_lines(report)
    if with_diagnostics:
        lines.extend(_diagnostic_line(d) for c in report.contracts for d in c.diagnostics)
        lines.extend(_diagnostic_line(d) for d in report.diagnostics)
    return "\n".join(lines) + ("\n" if lines else "")


def render_stats(stats: EvalStats) -> str:
    """Per-smell counts and ratios, then the overall line."""
    lines = ["SMELL\tTP\tFP\tFN\tPRECISION\tRECALL"]
    for s in stats.per_smell:
        lines.append(f"{s.smell.value}\t{s.tp}\t{s.fp}\t{s.fn}\t{format_ratio(s.precision)}\t{format_ratio(s.recall)}")
    lines.append(f"OVERALL\t\t\t\t{format_ratio(stats.weighted_precision)}\t{format_ratio(stats.recall)}")
    for failure in stats.failures:
        lines.append(f"# failed {failure.name}: {failure.reason}")
    for kind, count in stats.budget_counts.items():
        lines.append(f"# {kind}: {count}")
    return "\n".join(lines) + "\n"
