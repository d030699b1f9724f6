"""General intercept-resend attacks as per-case outcome-weight tables.

Eve's behaviour is described, case by case, by the probability of each
detector outcome she induces.  Outcome labels are three characters, one
per detector (D1, D2, D3):

* ``"0"``  the detector stays silent,
* ``"p"``  it clicks with Alice's polarization,
* ``"q"``  it clicks with Bob's polarization.

``"multi"`` is an aggregate multi-click bucket for when the exact click
pattern does not matter (every closed form only uses the per-case
multi-click mass).  Labels not listed in a table have weight zero.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

import numpy as np
from scipy.optimize import linprog

from .errors import ParameterError, StrategyError, DegenerateCaseError
from .protocol import BeamSplitter, CaseLabel, Observables

#: tolerance on normalization and on the beam-splitter ratio constraint
STRATEGY_TOL = 1e-9

MULTI = "multi"

_SINGLE_SUPPORT = {
    CaseLabel.C1: ("p00",),
    CaseLabel.C2: ("0p0",),
    CaseLabel.C3: ("p00", "0p0"),
    CaseLabel.C4: ("p00", "0p0", "00p"),
    CaseLabel.C5: ("p00", "0p0", "00q"),
}


def _check_label(label: str) -> str:
    if label == MULTI:
        return label
    if len(label) != 3 or any(ch not in "0pq" for ch in label):
        raise ParameterError(f"bad outcome label {label!r}; expected 'multi' or 3 chars of 0/p/q")
    return label


def n_clicks(label: str) -> int:
    if label == MULTI:
        return 2
    return sum(ch != "0" for ch in label)


def is_multi_click(label: str) -> bool:
    return n_clicks(label) >= 2


def is_supported(case: CaseLabel, label: str) -> bool:
    """Whether ``label`` is an outcome Eve may induce in ``case``."""
    if not is_multi_click(label):
        return label in _SINGLE_SUPPORT[case]
    if case in (CaseLabel.C4, CaseLabel.C5):
        return False
    if label == MULTI:
        return True
    x, y, z = label
    if case is CaseLabel.C1:
        return x != "0"
    if case is CaseLabel.C2:
        return y != "0"
    return z != "0"


class Knowledge(enum.Enum):
    NONE = "none"
    P_KNOWN = "p-known"


def eve_knowledge(case: CaseLabel, label: str) -> Knowledge:
    """Eve learns Alice's polarization only when she holds the path-b photon."""
    if case in (CaseLabel.C4, CaseLabel.C5) and not is_multi_click(label):
        return Knowledge.P_KNOWN
    return Knowledge.NONE


@dataclass(frozen=True)
class CaseWeights:
    """Outcome weights (squared amplitudes) for one case."""

    table: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for label, w in dict(self.table).items():
            w = float(w)
            if not math.isfinite(w):
                raise ParameterError(f"weight for {label!r} is not finite")
            clean[_check_label(label)] = w
        object.__setattr__(self, "table", MappingProxyType(clean))

    def __getitem__(self, label: str) -> float:
        return self.table.get(label, 0.0)

    @property
    def total(self) -> float:
        return math.fsum(self.table.values())

    @property
    def multi_mass(self) -> float:
        return math.fsum(w for k, w in self.table.items() if is_multi_click(k))

    @property
    def single_mass(self) -> float:
        return math.fsum(w for k, w in self.table.items() if not is_multi_click(k))

    def to_dict(self) -> dict[str, float]:
        return {k: w for k, w in self.table.items() if w != 0.0}


@dataclass(frozen=True)
class AttackStrategy:
    c1: CaseWeights
    c2: CaseWeights
    c3: CaseWeights
    c4: CaseWeights
    c5: CaseWeights

    def case(self, label: CaseLabel) -> CaseWeights:
        return getattr(self, label.value.lower())

    def items(self):
        for label in CaseLabel:
            yield label, self.case(label)

    def to_json_dict(self) -> dict[str, dict[str, float]]:
        return {label.value.lower(): cw.to_dict() for label, cw in self.items()}

    @classmethod
    def from_json_dict(cls, data: Mapping) -> "AttackStrategy":
        """Build a strategy from the ``{"c1": {...}, ..., "c5": {...}}`` file format.

        A missing case key falls back to the honest (identity) behaviour.
        """
        if not isinstance(data, Mapping):
            raise ParameterError("strategy must be a JSON object")
        unknown = set(data) - {"c1", "c2", "c3", "c4", "c5"}
        if unknown:
            raise ParameterError(f"unknown strategy keys: {sorted(unknown)}")
        ident = identity_strategy()
        cases = {}
        for label in CaseLabel:
            key = label.value.lower()
            if key in data:
                if not isinstance(data[key], Mapping):
                    raise ParameterError(f"{key} must map outcome labels to weights")
                cases[key] = CaseWeights(data[key])
            else:
                cases[key] = ident.case(label)
        return cls(**cases)

    def dumps(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=True)


class ViolationKind(enum.Enum):
    NOT_NORMALIZED = "not-normalized"
    NEGATIVE_WEIGHT = "negative-weight"
    UNSUPPORTED_OUTCOME = "unsupported-outcome"
    BS_RATIO_BROKEN = "bs-ratio-broken"


@dataclass(frozen=True)
class StrategyViolation:
    kind: ViolationKind
    case: CaseLabel
    magnitude: float

    def __str__(self):
        return f"{self.kind.value}[{self.case.value}]={self.magnitude:.3g}"


def identity_strategy() -> AttackStrategy:
    """The honest channel: every case yields its supposed outcome."""
    return AttackStrategy(
        c1=CaseWeights({"p00": 1.0}),
        c2=CaseWeights({"0p0": 1.0}),
        c3=CaseWeights({"0p0": 1.0}),
        c4=CaseWeights({"00p": 1.0}),
        c5=CaseWeights({"0p0": 1.0}),
    )


def block_and_probe_strategy(bs: BeamSplitter) -> AttackStrategy:
    """Eve intercepts every path-b photon and resends it towards Alice.

    In C4 the resent photon splits at the beam splitter as R : T between D1
    and D2; D3 never clicks.
    """
    ident = identity_strategy()
    return AttackStrategy(
        c1=ident.c1,
        c2=ident.c2,
        c3=ident.c3,
        c4=CaseWeights({"p00": bs.R, "0p0": bs.T}),
        c5=CaseWeights({"0p0": 1.0}),
    )


def validate_strategy(s: AttackStrategy, bs: BeamSplitter) -> list[StrategyViolation]:
    out = []
    for case, cw in s.items():
        negative = [w for w in cw.table.values() if w < 0]
        if negative:
            out.append(StrategyViolation(ViolationKind.NEGATIVE_WEIGHT, case, -min(negative)))
        stray = [abs(w) for k, w in cw.table.items() if w != 0 and not is_supported(case, k)]
        if stray:
            out.append(StrategyViolation(ViolationKind.UNSUPPORTED_OUTCOME, case, math.fsum(stray)))
        gap = abs(cw.total - 1.0)
        if gap > STRATEGY_TOL:
            out.append(StrategyViolation(ViolationKind.NOT_NORMALIZED, case, gap))
    ratio_gap = abs(s.c4["p00"] * bs.T - s.c4["0p0"] * bs.R)
    if ratio_gap > STRATEGY_TOL:
        out.append(StrategyViolation(ViolationKind.BS_RATIO_BROKEN, CaseLabel.C4, ratio_gap))
    return out


def _require_valid(s: AttackStrategy, bs: BeamSplitter) -> None:
    violations = validate_strategy(s, bs)
    if violations:
        raise StrategyError(violations)


def restrict_noiseless(s: AttackStrategy, bs: BeamSplitter | None = None) -> AttackStrategy:
    """Drop every multi-click outcome and renormalize each case.

    ``bs`` is only needed to check the beam-splitter ratio of the input; it
    can be omitted when the strategy is known to be valid.
    """
    if bs is not None:
        _require_valid(s, bs)
    cases = {}
    for case, cw in s.items():
        single = {k: w for k, w in cw.table.items() if not is_multi_click(k)}
        mass = math.fsum(single.values())
        if mass <= 0.0:
            raise DegenerateCaseError(f"{case.value} has no single-click weight to renormalize")
        if cw.multi_mass == 0.0:
            cases[case.value.lower()] = cw
        else:
            cases[case.value.lower()] = CaseWeights({k: w / mass for k, w in single.items()})
    return AttackStrategy(**cases)


def observables_from_strategy(s: AttackStrategy, bs: BeamSplitter) -> Observables:
    """Detection statistics produced by an attack strategy (perfect detectors)."""
    _require_valid(s, bs)
    R, T = bs.R, bs.T
    c1, c2, c3, c4, c5 = s.c1, s.c2, s.c3, s.c4, s.c5
    return Observables(
        p_D1=R * T / 2 * c1["p00"] + R / 2 * c3["p00"] + T / 2 * c4["p00"] + T / 2 * c5["p00"],
        p_D2=R * R / 2 * c2["0p0"] + R / 2 * c3["0p0"] + T / 2 * c4["0p0"] + T / 2 * c5["0p0"],
        p_D3=T / 2 * (c4["00p"] + c5["00q"]),
        p_e1=R / 2 * c3["p00"] + T / 2 * c5["p00"],
        p_e2=0.0,
        p_e3=T / 2 * c5["00q"],
        p_E4=R * T / 2 * c1.multi_mass + R * R / 2 * c2.multi_mass + R / 2 * c3.multi_mass,
    )


def sample_noiseless_strategy(rng: np.random.Generator, bs: BeamSplitter) -> AttackStrategy:
    """Draw a random valid strategy without multi-click outcomes."""
    c3 = rng.dirichlet([1.0, 1.0])
    a = rng.random()
    c5 = rng.dirichlet([1.0, 1.0, 1.0])
    return AttackStrategy(
        c1=CaseWeights({"p00": 1.0}),
        c2=CaseWeights({"0p0": 1.0}),
        c3=CaseWeights({"p00": c3[0], "0p0": c3[1]}),
        c4=CaseWeights({"p00": bs.R * a, "0p0": bs.T * a, "00p": 1.0 - a}),
        c5=CaseWeights({"p00": c5[0], "0p0": c5[1], "00q": c5[2]}),
    )


# -- inverse problem ---------------------------------------------------------

# unknowns: c1 (p00, multi), c2 (0p0, multi), c3 (p00, 0p0, multi),
# c4 intercept fraction a, c5 (p00, 0p0, 00q).  The beam-splitter ratio
# plane is built into c4: p00 = R a, 0p0 = T a, 00p = 1 - a.
_N_VARS = 11
_SIMPLEX_BLOCKS = ((0, 2), (2, 4), (4, 7), (8, 11))
_A_INDEX = 7


def _forward_matrix(bs: BeamSplitter) -> tuple[np.ndarray, np.ndarray]:
    R, T = bs.R, bs.T
    A = np.zeros((7, _N_VARS))
    c = np.zeros(7)
    # p_D1
    A[0, [0, 4, _A_INDEX, 8]] = [R * T / 2, R / 2, T / 2 * R, T / 2]
    # p_D2
    A[1, [2, 5, _A_INDEX, 9]] = [R * R / 2, R / 2, T / 2 * T, T / 2]
    # p_D3
    A[2, [_A_INDEX, 10]] = [-T / 2, T / 2]
    c[2] = T / 2
    # p_e1
    A[3, [4, 8]] = [R / 2, T / 2]
    # p_e2 row stays zero
    # p_e3
    A[5, 10] = T / 2
    # p_E4
    A[6, [1, 3, 6]] = [R * T / 2, R * R / 2, R / 2]
    return A, c


def _strategy_from_vector(x: np.ndarray, bs: BeamSplitter) -> AttackStrategy:
    x = np.clip(x, 0.0, None)
    for lo, hi in _SIMPLEX_BLOCKS:
        x[lo:hi] /= x[lo:hi].sum()
    a = min(max(float(x[_A_INDEX]), 0.0), 1.0)
    return AttackStrategy(
        c1=CaseWeights({"p00": x[0], MULTI: x[1]}),
        c2=CaseWeights({"0p0": x[2], MULTI: x[3]}),
        c3=CaseWeights({"p00": x[4], "0p0": x[5], MULTI: x[6]}),
        c4=CaseWeights({"p00": bs.R * a, "0p0": bs.T * a, "00p": 1.0 - a}),
        c5=CaseWeights({"p00": x[8], "0p0": x[9], "00q": x[10]}),
    )


def forward_residuals(s: AttackStrategy, bs: BeamSplitter, target: Observables) -> dict[str, float]:
    got = observables_from_strategy(s, bs).as_dict()
    return {k: got[k] - v for k, v in target.as_dict().items()}


@dataclass(frozen=True)
class SolveResult:
    """Outcome of :func:`solve_strategy`.

    ``strategy`` is the best strategy found even when ``feasible`` is False;
    ``residual`` is its max-norm mismatch over the observables.
    """

    strategy: AttackStrategy
    residual: float
    residuals: Mapping[str, float]
    feasible: bool


def solve_strategy(target: Observables, bs: BeamSplitter, tolerance: float = 1e-9) -> SolveResult:
    """Find a valid attack strategy reproducing ``target``.

    The forward map is affine on the polytope of valid strategies, so
    minimizing the max-norm residual is a linear program; it is solved
    exactly (to solver precision) with HiGHS and then cleaned back onto the
    polytope.
    """
    if not isinstance(target, Observables):
        raise ParameterError("target must be Observables")
    if not (tolerance > 0):
        raise ParameterError("tolerance must be positive")
    A, c = _forward_matrix(bs)
    b = np.array([getattr(target, k) for k in Observables.field_names()])

    # variables: x (11) then t; minimize t subject to |A x + c - b| <= t
    n = _N_VARS + 1
    cost = np.zeros(n)
    cost[-1] = 1.0
    ones = np.ones((7, 1))
    A_ub = np.vstack([np.hstack([A, -ones]), np.hstack([-A, -ones])])
    b_ub = np.concatenate([b - c, c - b])
    A_eq = np.zeros((len(_SIMPLEX_BLOCKS), n))
    for i, (lo, hi) in enumerate(_SIMPLEX_BLOCKS):
        A_eq[i, lo:hi] = 1.0
    b_eq = np.ones(len(_SIMPLEX_BLOCKS))
    bounds = [(0.0, 1.0)] * _N_VARS + [(0.0, None)]
    res = linprog(
        cost, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds, method="highs",
        options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
    )
    if res.x is None:  # pragma: no cover - the polytope is never empty
        raise RuntimeError(f"linear program failed: {res.message}")
    strategy = _strategy_from_vector(res.x[:_N_VARS].copy(), bs)
    residuals = forward_residuals(strategy, bs, target)
    worst = max(abs(v) for v in residuals.values())
    return SolveResult(strategy, worst, MappingProxyType(residuals), worst <= tolerance)
