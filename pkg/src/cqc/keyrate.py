"""Asymptotic key rate of the protocol from observed detection statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError, InconsistentObservablesError, UndefinedQBERError
from .protocol import BeamSplitter, Observables


def binary_entropy(x: float) -> float:
    """Binary Shannon entropy in bits, with h(0) = h(1) = 0."""
    if not (0.0 <= x <= 1.0):
        raise DomainError(f"binary entropy needs x in [0, 1], got {x!r}")
    if x == 0.0 or x == 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


def qber(obs: Observables) -> float:
    """Error rate conditioned on a D1 click, p_e1 / p_D1."""
    if obs.p_D1 <= 0.0:
        raise UndefinedQBERError("QBER undefined: p_D1 = 0 (no key events)")
    return min(obs.p_e1 / obs.p_D1, 1.0)


def mutual_info_ab(obs: Observables) -> float:
    if obs.p_D1 <= 0.0:
        return 0.0
    return obs.p_D1 * (1.0 - binary_entropy(qber(obs)))


def mutual_info_ae(obs: Observables, bs: BeamSplitter) -> float:
    """Eve's information, (T/2 + p_e3 - p_D3) R.

    Only the D3 statistics enter: a photon Eve pulls out of path b shows up
    as a deficit of honest D3 clicks.
    """
    value = (bs.T / 2 + obs.p_e3 - obs.p_D3) * bs.R
    if value < -1e-9:
        raise InconsistentObservablesError(
            f"p_D3 = {obs.p_D3} exceeds T/2 + p_e3 = {bs.T / 2 + obs.p_e3}"
        )
    return max(value, 0.0)


@dataclass(frozen=True)
class KeyRateReport:
    qber: float
    i_ab: float
    i_ae: float
    m_k: float

    def as_dict(self) -> dict[str, float]:
        return {"qber": self.qber, "i_ab": self.i_ab, "i_ae": self.i_ae, "m_k": self.m_k}


def key_rate(obs: Observables, bs: BeamSplitter) -> KeyRateReport:
    """Secret bits per pulse, I_AB - I_AE.  Negative rates are not clamped."""
    e = qber(obs)
    i_ab = mutual_info_ab(obs)
    i_ae = mutual_info_ae(obs, bs)
    return KeyRateReport(qber=e, i_ab=i_ab, i_ae=i_ae, m_k=i_ab - i_ae)
