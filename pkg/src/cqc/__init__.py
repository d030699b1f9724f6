"""Security analysis of counterfactual QKD under general intercept-resend attacks."""

from .attack import AttackStrategy, CaseWeights, observables_from_strategy, solve_strategy
from .imperfections import DetectorModel, EfficiencyCurve, attacked_key_rate
from .keyrate import key_rate
from .montecarlo import SimConfig, compare, simulate
from .protocol import BeamSplitter, Observables, ideal_observables

__version__ = "0.1.0"

__all__ = [
    "AttackStrategy",
    "BeamSplitter",
    "CaseWeights",
    "DetectorModel",
    "EfficiencyCurve",
    "Observables",
    "SimConfig",
    "attacked_key_rate",
    "compare",
    "ideal_observables",
    "key_rate",
    "observables_from_strategy",
    "simulate",
    "solve_strategy",
]
