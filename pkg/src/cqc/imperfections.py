"""Imperfect detectors: dark counts, time-dependent efficiency, time-shift attack."""

from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass
from typing import Mapping

from .attack import AttackStrategy, observables_from_strategy
from .errors import DarkCountRegimeError, ParameterError, SingularityError
from .keyrate import KeyRateReport, binary_entropy, key_rate
from .protocol import BeamSplitter, Observables


class CurveShape(enum.Enum):
    FLAT = "flat"
    TRAPEZOID = "trapezoid"
    GAUSSIAN_WINDOW = "gaussian-window"


def _prob(name: str, v: float, upper_open: bool = False) -> float:
    v = float(v)
    ok = 0.0 <= v < 1.0 if upper_open else 0.0 <= v <= 1.0
    if not (math.isfinite(v) and ok):
        raise ParameterError(f"{name} must be in [0, {'1)' if upper_open else '1]'}, got {v!r}")
    return v


@dataclass(frozen=True)
class EfficiencyCurve:
    """Detection efficiency as a function of photon arrival time (ns).

    ``width`` is a full width.  For the gaussian window it is the FWHM.
    The trapezoid falls from ``eta_max`` to ``floor`` between
    ``width/4`` and ``width/2`` away from ``center``.
    """

    shape: CurveShape = CurveShape.GAUSSIAN_WINDOW
    eta_max: float = 1.0
    center: float = 0.0
    width: float = 1.0
    floor: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "shape", CurveShape(self.shape))
        _prob("eta_max", self.eta_max)
        _prob("floor", self.floor)
        if self.floor > self.eta_max:
            raise ParameterError("floor must not exceed eta_max")
        if not math.isfinite(self.center):
            raise ParameterError("center must be finite")
        if self.shape is not CurveShape.FLAT and not (self.width > 0 and math.isfinite(self.width)):
            raise ParameterError("width must be positive for a non-flat curve")

    def __call__(self, t: float) -> float:
        if self.shape is CurveShape.FLAT:
            return self.eta_max
        dt = abs(t - self.center)
        span = self.eta_max - self.floor
        if self.shape is CurveShape.GAUSSIAN_WINDOW:
            return self.floor + span * 2.0 ** (-((2.0 * dt / self.width) ** 2))
        half, top = self.width / 2, self.width / 4
        if dt <= top:
            return self.eta_max
        if dt >= half:
            return self.floor
        return self.floor + span * (half - dt) / (half - top)


@dataclass(frozen=True)
class DetectorModel:
    curve: EfficiencyCurve = EfficiencyCurve(CurveShape.FLAT)
    p_d: float = 0.0

    def __post_init__(self):
        _prob("p_d", self.p_d, upper_open=True)

    @classmethod
    def ideal(cls) -> "DetectorModel":
        return cls(EfficiencyCurve(CurveShape.FLAT, eta_max=1.0), 0.0)

    @property
    def is_ideal(self) -> bool:
        return self.p_d == 0.0 and self.curve.shape is CurveShape.FLAT and self.curve.eta_max == 1.0

    @classmethod
    def from_json_dict(cls, data: Mapping) -> "DetectorModel":
        """Parse ``{"shape", "eta_max", "center_ns", "width_ns", "floor", "p_d"}``."""
        known = {"shape", "eta_max", "center_ns", "width_ns", "floor", "p_d"}
        extra = set(data) - known
        if extra:
            raise ParameterError(f"unknown detector keys: {sorted(extra)}")
        try:
            shape = CurveShape(data.get("shape", CurveShape.GAUSSIAN_WINDOW.value))
        except ValueError:
            raise ParameterError(f"unknown curve shape {data.get('shape')!r}") from None
        curve = EfficiencyCurve(
            shape=shape,
            eta_max=data.get("eta_max", 1.0),
            center=data.get("center_ns", 0.0),
            width=data.get("width_ns", 1.0),
            floor=data.get("floor", 0.0),
        )
        return cls(curve, data.get("p_d", 0.0))

    def to_json_dict(self) -> dict:
        c = self.curve
        return {
            "shape": c.shape.value,
            "eta_max": c.eta_max,
            "center_ns": c.center,
            "width_ns": c.width,
            "floor": c.floor,
            "p_d": self.p_d,
        }


@dataclass(frozen=True)
class TimeShiftScenario:
    detector: DetectorModel
    shift: float = 0.0


def effective_efficiency(scenario: TimeShiftScenario) -> float:
    """Efficiency seen by a pulse that Eve delays by ``shift`` ns."""
    curve = scenario.detector.curve
    return curve(curve.center + scenario.shift)


def measured_observables(obs: Observables, eta: float) -> Observables:
    """Apply a D3 efficiency ``eta`` to statistics from perfect detectors.

    Only the D3 click and error probabilities scale; D1 and D2 are left
    untouched, which is the reduction the time-shift analysis relies on.
    """
    eta = _prob("eta", eta)
    return dataclasses.replace(obs, p_D3=eta * obs.p_D3, p_e3=eta * obs.p_e3)


@dataclass(frozen=True)
class E4Check:
    passed: bool
    p_E4: float
    bound: float

    @property
    def excess(self) -> float:
        return max(self.p_E4 - self.bound, 0.0)


def e4_bound_check(s: AttackStrategy, bs: BeamSplitter, p_d: float) -> E4Check:
    """Eve stays hidden only if her multi-click rate is below the dark-count level 2 p_d."""
    p_d = _prob("p_d", p_d, upper_open=True)
    p_E4 = observables_from_strategy(s, bs).p_E4
    bound = 2.0 * p_d
    return E4Check(p_E4 <= bound + 1e-12, p_E4, bound)


def corrupted_rate_max(p_d: float, obs: Observables, bs: BeamSplitter) -> float:
    """Largest loss of Alice-Bob information that Eve can hide behind dark counts.

    ``obs`` carries the dark-count-free (ideal-device) p_D1 and p_e1.
    """
    p_d = _prob("p_d", p_d, upper_open=True)
    if p_d == 0.0:
        return 0.0
    P, e = obs.p_D1, obs.p_e1
    d = (bs.T + 1.0) * p_d
    if P <= 0.0 or not (P - d > e >= 0.0):
        raise DarkCountRegimeError(
            f"need p_D1 - (T+1) p_d > p_e1; got {P} - {d} <= {e}"
        )
    return d + (P - d) * binary_entropy(e / (P - d)) - P * binary_entropy(e / P)


def delta_info_eta(eta: float, obs: Observables, bs: BeamSplitter) -> float:
    """Extra information Eve gains by pushing D3's efficiency down to ``eta``.

    ``obs`` are the measured statistics (D3 already attenuated by ``eta``).
    """
    eta = float(eta)
    if eta == 0.0:
        raise SingularityError("eta = 0: D3 fully suppressed, information gain unbounded")
    if not (0.0 < eta <= 1.0):
        raise ParameterError(f"eta must be in (0, 1], got {eta!r}")
    return (1.0 - eta) / eta * (obs.p_D3 - obs.p_e3) * bs.R


@dataclass(frozen=True)
class AttackedKeyRateReport(KeyRateReport):
    gamma_cmax: float = 0.0
    delta_i_eta: float = 0.0
    delta_m_k: float = 0.0
    m_k_prime: float = 0.0

    def as_dict(self) -> dict[str, float]:
        out = super().as_dict()
        out.update(
            gamma_cmax=self.gamma_cmax,
            delta_i_eta=self.delta_i_eta,
            delta_m_k=self.delta_m_k,
            m_k_prime=self.m_k_prime,
        )
        return out


def attacked_key_rate(
    obs: Observables, bs: BeamSplitter, eta: float, p_d: float
) -> AttackedKeyRateReport:
    """Key rate once Eve also exploits dark counts and a time-shifted D3.

    The result may be negative; it is never clamped.
    """
    base = key_rate(obs, bs)
    gamma = corrupted_rate_max(p_d, obs, bs)
    d_info = delta_info_eta(eta, obs, bs)
    delta = gamma + d_info
    return AttackedKeyRateReport(
        qber=base.qber,
        i_ab=base.i_ab,
        i_ae=base.i_ae,
        m_k=base.m_k,
        gamma_cmax=gamma,
        delta_i_eta=d_info,
        delta_m_k=delta,
        m_k_prime=base.m_k - delta,
    )
