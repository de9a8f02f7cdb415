"""Agent-based model of propagandists and journalists curating scientific evidence
for policy makers, with the semi-analytic one-round drift approximation."""

from .core import (
    Arm,
    Credence,
    EffectSize,
    Favors,
    NetworkKind,
    NetworkTopology,
    StudyResult,
    build_network,
    draw_study,
    favors,
    likelihood_ratio,
    update_credence,
)
from .engine import BatchSummary, Consensus, RunOutcome, SimConfig, run_batch, run_simulation

__all__ = [
    "Arm",
    "BatchSummary",
    "Consensus",
    "Credence",
    "EffectSize",
    "Favors",
    "NetworkKind",
    "NetworkTopology",
    "RunOutcome",
    "SimConfig",
    "StudyResult",
    "build_network",
    "draw_study",
    "favors",
    "likelihood_ratio",
    "run_batch",
    "run_simulation",
    "update_credence",
]
