"""CRN simulation and analysis under stochastic and weakly fair adversarial schedulers."""

from .core import (
    Crn,
    CrdSpec,
    Interface,
    Reaction,
    Species,
    VolumeConvention,
    applicable,
    apply_reaction,
    build_crn,
    conf_from_counts,
    conf_total,
    interface_vector,
    propensity,
    total_propensity,
    valid_initial,
)
from .digraph import (
    DigraphAnalysis,
    TargetSetZ,
    check_strong_correctness,
    check_weak_correctness,
    explore,
    find_pitfalls,
    stab_halt_sets,
)

__version__ = "0.1.0"
