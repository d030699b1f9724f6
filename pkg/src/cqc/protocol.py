"""Ideal counterfactual QKD: domain types and no-Eve statistics.

Alice sends a single photon of polarization ``p`` into a beam splitter.  The
reflected sub-pulse stays in her station (path ``a``); the transmitted one
travels to Bob (path ``b``), who blocks it only when his polarization ``q``
equals ``p``.  Three detectors are involved: D1 and D2 at Alice's side of
the interferometer, D3 behind Bob's blocking switch.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, fields

from .errors import InvalidConfigurationError, ParameterError

#: absolute tolerance used for every probability identity
ATOL = 1e-12


class Polarization(enum.Enum):
    H = "H"
    V = "V"

    @property
    def other(self) -> "Polarization":
        return Polarization.V if self is Polarization.H else Polarization.H


class Detector(enum.IntEnum):
    D1 = 1
    D2 = 2
    D3 = 3


class CaseLabel(enum.Enum):
    """The five configurations over which an intercept-resend attack acts.

    ========  ======  ===========  =================
    case      p = q   path b       supposed detector
    ========  ======  ===========  =================
    C1        yes     vacuum       D1
    C2        yes     vacuum       D2
    C3        no      vacuum       D2
    C4        yes     occupied     D3
    C5        no      occupied     D2
    ========  ======  ===========  =================
    """

    C1 = "C1"
    C2 = "C2"
    C3 = "C3"
    C4 = "C4"
    C5 = "C5"


_CLICK_LABELS = ("0", "H", "V")


@dataclass(frozen=True)
class DetectorOutcome:
    """Click labels of (D1, D2, D3); ``"0"`` means no click."""

    x: str = "0"
    y: str = "0"
    z: str = "0"

    def __post_init__(self):
        for v in (self.x, self.y, self.z):
            if v not in _CLICK_LABELS:
                raise ParameterError(f"click label must be one of {_CLICK_LABELS}, got {v!r}")

    @property
    def n_clicks(self) -> int:
        return sum(v != "0" for v in (self.x, self.y, self.z))

    @property
    def multi_click(self) -> bool:
        return self.n_clicks >= 2


@dataclass(frozen=True)
class BeamSplitter:
    """Reflectance/transmittance pair of Alice's beam splitter."""

    R: float
    T: float

    def __post_init__(self):
        for name in ("R", "T"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and 0.0 <= v <= 1.0):
                raise ParameterError(f"{name} must be a probability in [0, 1], got {v!r}")
        if abs(self.R + self.T - 1.0) > ATOL:
            raise ParameterError(f"R + T must equal 1, got {self.R} + {self.T}")

    @classmethod
    def from_reflectance(cls, R: float) -> "BeamSplitter":
        if not (isinstance(R, (int, float)) and math.isfinite(R) and 0.0 <= R <= 1.0):
            raise ParameterError(f"R must be a probability in [0, 1], got {R!r}")
        return cls(float(R), 1.0 - float(R))


@dataclass(frozen=True)
class Observables:
    """Per-pulse detection statistics.

    Error fields are *joint* probabilities (click at the detector AND Alice's
    and Bob's polarization choices disagree), not conditional rates.
    ``p_E4`` is the probability that two or more detectors click.
    """

    p_D1: float
    p_D2: float
    p_D3: float
    p_e1: float = 0.0
    p_e2: float = 0.0
    p_e3: float = 0.0
    p_E4: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not (math.isfinite(v) and -ATOL <= v <= 1.0 + ATOL):
                raise ParameterError(f"{f.name} must lie in [0, 1], got {v!r}")
        for err, click in (("p_e1", "p_D1"), ("p_e2", "p_D2"), ("p_e3", "p_D3")):
            if getattr(self, err) > getattr(self, click) + ATOL:
                raise ParameterError(f"{err} cannot exceed {click}")
        total = self.p_D1 + self.p_D2 + self.p_D3 + self.p_E4
        if total > 1.0 + 1e-9:
            raise ParameterError(f"click probabilities sum to {total} > 1")

    def as_dict(self) -> dict[str, float]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def field_names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))


def ideal_observables(bs: BeamSplitter) -> Observables:
    """Detection statistics with no eavesdropper and perfect detectors."""
    if not isinstance(bs, BeamSplitter):
        raise ParameterError("expected a BeamSplitter")
    R, T = bs.R, bs.T
    return Observables(
        p_D1=R * T / 2,
        p_D2=R * R / 2 + 0.5,
        p_D3=T / 2,
    )


def classify_case(
    p: Polarization, q: Polarization, mode_b_occupied: bool, supposed: Detector
) -> CaseLabel:
    supposed = Detector(supposed)
    if p == q:
        if not mode_b_occupied:
            if supposed is Detector.D1:
                return CaseLabel.C1
            if supposed is Detector.D2:
                return CaseLabel.C2
        elif supposed is Detector.D3:
            return CaseLabel.C4
    else:
        if supposed is Detector.D2:
            return CaseLabel.C5 if mode_b_occupied else CaseLabel.C3
    raise InvalidConfigurationError(
        f"no case for p={p.value}, q={q.value}, "
        f"path b {'occupied' if mode_b_occupied else 'vacuum'}, supposed {supposed.name}"
    )


def supposed_outcome_distribution(
    bs: BeamSplitter, p: Polarization, q: Polarization
) -> list[tuple[CaseLabel, float]]:
    """Case probabilities for one (p, q) branch of the honest protocol.

    The weights are conditional on the branch, i.e. they exclude the 1/2
    prefactor from Bob's random choice, and sum to one.
    """
    if not isinstance(bs, BeamSplitter):
        raise ParameterError("expected a BeamSplitter")
    R, T = bs.R, bs.T
    if p == q:
        # reflected photon: path a interferes towards D1 (T) or D2 (R)
        return [(CaseLabel.C1, R * T), (CaseLabel.C2, R * R), (CaseLabel.C4, T)]
    return [(CaseLabel.C3, R), (CaseLabel.C5, T)]
