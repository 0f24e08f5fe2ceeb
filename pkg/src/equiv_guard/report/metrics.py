"""
report.metrics - Precision and recall against corpus labels.

Counting is per (entry, smell): an entry labelled with a smell and reported
with it is one true positive no matter how many findings it produced.
"""

import logging
from collections import Counter
from typing import Iterable, List, Optional, Sequence, Tuple

from equiv_guard.detectors.models import BudgetEvent, Finding
from equiv_guard.ingest.corpus import EntryFailure
from equiv_guard.models import ALL_SMELLS, Smell
from equiv_guard.report.models import EvalStats, SmellStats

logger = logging.getLogger(__name__)

UNDEFINED = "n/a"

LabelledResult = Tuple[str, Sequence[Smell], Sequence[Finding]]


def compute_stats(results: Iterable[LabelledResult], smells: Sequence[Smell] = ALL_SMELLS,
                  failures: Optional[List[EntryFailure]] = None,
                  budget_events: Iterable[BudgetEvent] = ()) -> EvalStats:
    """Join findings with labels.

    Args:
        results: (entry name, labelled smells, findings) per analysed entry.
        smells: Smells to score; usually the enabled detectors.
        failures: Entries that could not be analysed; listed, not counted.
        budget_events: Timeouts and bound hits over the whole run.
    """
    per_smell = {smell: SmellStats(smell=smell) for smell in smells}
    entries = 0
    for name, labels, findings in results:
        entries += 1
        reported = {f.smell for f in findings}
        for smell, stats in per_smell.items():
            labelled = smell in labels
            found = smell in reported
            if found and labelled:
                stats.tp += 1
            elif found:
                stats.fp += 1
                logger.info("false positive: %s in %s", smell.value, name)
            elif labelled:
                stats.fn += 1
                logger.info("false negative: %s in %s", smell.value, name)
    counts = Counter(event.kind for event in budget_events)
    return EvalStats(per_smell=list(per_smell.values()), entries=entries, failures=list(failures or []),
                     budget_counts=dict(sorted(counts.items())))


def format_ratio(value: Optional[float]) -> str:
    """A ratio as a two-decimal percentage, e.g. 0.97727 -> '97.73%'."""
    return UNDEFINED if value is None else f"{value * 100:.2f}%"
