"""Trial-level Monte Carlo of the protocol, used as an oracle for the closed forms.

Every trial draws Alice's and Bob's polarizations, the honest case, Eve's
induced outcome and the detector response, then tallies the event class.
Trials are grouped in fixed-size blocks; block ``b`` always draws from the
Philox stream keyed by ``(seed, b)``, so the tallies depend on the seed and
the trial count only, never on how blocks are spread over shards.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .attack import MULTI, AttackStrategy, identity_strategy, validate_strategy
from .errors import ParameterError, StrategyError
from .imperfections import DetectorModel, TimeShiftScenario, effective_efficiency
from .protocol import BeamSplitter, CaseLabel, Observables

BLOCK_SIZE = 1 << 16

COUNT_KEYS = ("E1", "E2", "E3", "E4", "no_click", "e1", "e2", "e3")

# click pattern used for the aggregate "multi" label in each case
_MULTI_PATTERN = {
    CaseLabel.C1: (1, 1, 0),
    CaseLabel.C2: (1, 1, 0),
    CaseLabel.C3: (0, 1, 1),
}

_CASES = tuple(CaseLabel)


@dataclass(frozen=True)
class SimConfig:
    n_trials: int
    seed: int = 0
    shards: int = 1

    def __post_init__(self):
        if int(self.n_trials) != self.n_trials or self.n_trials < 1:
            raise ParameterError("n_trials must be a positive integer")
        if not (0 <= self.seed < 2**64):
            raise ParameterError("seed must be an unsigned 64-bit integer")
        if int(self.shards) != self.shards or self.shards < 1:
            raise ParameterError("shards must be a positive integer")


@dataclass(frozen=True)
class EmpiricalObservables:
    n_trials: int
    counts: Mapping[str, int]
    estimates: Observables
    std_errors: Mapping[str, float]

    @classmethod
    def from_counts(cls, counts: Mapping[str, int]) -> "EmpiricalObservables":
        n = counts["E1"] + counts["E2"] + counts["E3"] + counts["E4"] + counts["no_click"]
        est = Observables(
            p_D1=counts["E1"] / n,
            p_D2=counts["E2"] / n,
            p_D3=counts["E3"] / n,
            p_e1=counts["e1"] / n,
            p_e2=counts["e2"] / n,
            p_e3=counts["e3"] / n,
            p_E4=counts["E4"] / n,
        )
        se = {k: math.sqrt(v * (1.0 - v) / n) for k, v in est.as_dict().items()}
        return cls(n, dict(counts), est, se)

    def to_json_dict(self) -> dict:
        return {
            "n_trials": self.n_trials,
            "counts": {k: self.counts[k] for k in COUNT_KEYS},
            "estimates": self.estimates.as_dict(),
            "std_errors": dict(self.std_errors),
        }


def _outcome_tables(s: AttackStrategy):
    """Per case: cumulative weights and the matching (D1, D2, D3) click patterns."""
    tables = []
    for case in _CASES:
        cw = s.case(case)
        labels = [k for k, w in cw.table.items() if w > 0]
        weights = np.array([cw[k] for k in labels])
        cum = np.cumsum(weights / weights.sum())
        patterns = np.array(
            [_MULTI_PATTERN[case] if k == MULTI else [ch != "0" for ch in k] for k in labels],
            dtype=bool,
        )
        tables.append((cum, patterns))
    return tables


def _block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(block,))))


def _run_block(rng, n, bs, tables, eta, p_d) -> np.ndarray:
    R, T = bs.R, bs.T
    p = rng.integers(0, 2, n, dtype=np.int8)
    q = rng.integers(0, 2, n, dtype=np.int8)
    same = p == q

    u = rng.random(n)
    case = np.where(
        same,
        np.where(u < R * T, 0, np.where(u < R * T + R * R, 1, 3)),
        np.where(u < R, 2, 4),
    )

    v = rng.random(n)
    clicks = np.zeros((n, 3), dtype=bool)
    for i, (cum, patterns) in enumerate(tables):
        sel = case == i
        if not sel.any():
            continue
        idx = np.searchsorted(cum, v[sel], side="right")
        clicks[sel] = patterns[np.minimum(idx, len(patterns) - 1)]

    if eta < 1.0:
        clicks &= rng.random((n, 3)) < eta
    if p_d > 0.0:
        clicks |= rng.random((n, 3)) < p_d

    nc = clicks.sum(axis=1)
    single = nc == 1
    e1 = single & clicks[:, 0]
    e2 = single & clicks[:, 1]
    e3 = single & clicks[:, 2]
    err = ~same
    return np.array(
        [
            e1.sum(),
            e2.sum(),
            e3.sum(),
            (nc >= 2).sum(),
            (nc == 0).sum(),
            (e1 & err).sum(),
            0,  # D2 clicks carry no key bit
            (e3 & err).sum(),
        ],
        dtype=np.int64,
    )


def _run_shard(blocks: Iterable[int], cfg: SimConfig, bs, tables, eta, p_d) -> np.ndarray:
    total = np.zeros(len(COUNT_KEYS), dtype=np.int64)
    for b in blocks:
        n = min(BLOCK_SIZE, cfg.n_trials - b * BLOCK_SIZE)
        total += _run_block(_block_rng(cfg.seed, b), n, bs, tables, eta, p_d)
    return total


def simulate(
    bs: BeamSplitter,
    strategy: AttackStrategy | None,
    detector: DetectorModel | None,
    cfg: SimConfig,
    shift: float = 0.0,
) -> EmpiricalObservables:
    """Run ``cfg.n_trials`` pulses and tally detector events.

    ``strategy=None`` is the honest channel and ``detector=None`` an ideal
    detector.  A non-ideal detector is applied to all three detectors after
    Eve acts: each click survives with the efficiency at the shifted arrival
    time, each detector independently dark-fires with probability ``p_d``.
    """
    if strategy is None:
        strategy = identity_strategy()
    violations = validate_strategy(strategy, bs)
    if violations:
        raise StrategyError(violations)
    if detector is None:
        detector = DetectorModel.ideal()
    eta = effective_efficiency(TimeShiftScenario(detector, shift))
    tables = _outcome_tables(strategy)

    n_blocks = -(-cfg.n_trials // BLOCK_SIZE)
    shards = [range(k, n_blocks, cfg.shards) for k in range(min(cfg.shards, n_blocks))]
    if len(shards) == 1:
        parts = [_run_shard(shards[0], cfg, bs, tables, eta, detector.p_d)]
    else:
        with ThreadPoolExecutor(max_workers=len(shards)) as pool:
            parts = list(
                pool.map(lambda blk: _run_shard(blk, cfg, bs, tables, eta, detector.p_d), shards)
            )
    total = np.sum(parts, axis=0)
    return EmpiricalObservables.from_counts(dict(zip(COUNT_KEYS, (int(c) for c in total))))


@dataclass(frozen=True)
class FieldComparison:
    estimate: float
    expected: float
    std_error: float
    z: float
    passed: bool


@dataclass(frozen=True)
class ComparisonReport:
    fields: Mapping[str, FieldComparison]
    z_threshold: float

    @property
    def passed(self) -> bool:
        return all(f.passed for f in self.fields.values())

    @property
    def failed_fields(self) -> list[str]:
        return [k for k, f in self.fields.items() if not f.passed]

    def to_json_dict(self) -> dict:
        return {
            "z_threshold": self.z_threshold,
            "passed": self.passed,
            "fields": {
                k: {
                    "estimate": f.estimate,
                    "expected": f.expected,
                    "std_error": f.std_error,
                    "z": f.z if math.isfinite(f.z) else None,
                    "passed": f.passed,
                }
                for k, f in self.fields.items()
            },
        }


def compare(
    emp: EmpiricalObservables,
    analytic: Observables,
    z_threshold: float = 4.0,
    fields: Iterable[str] | None = None,
) -> ComparisonReport:
    """z-test every observable of a simulation run against closed-form values.

    When the empirical standard error is zero (estimate of exactly 0 or 1)
    the binomial error of the expected value is used instead; if that is
    zero too the two values must agree exactly.
    """
    if not z_threshold > 0:
        raise ParameterError("z_threshold must be positive")
    names = tuple(fields) if fields is not None else Observables.field_names()
    out = {}
    n = emp.n_trials
    for name in names:
        est = getattr(emp.estimates, name)
        exp = getattr(analytic, name)
        se = emp.std_errors[name]
        if se == 0.0:
            se = math.sqrt(exp * (1.0 - exp) / n) if 0.0 < exp < 1.0 else 0.0
        diff = abs(est - exp)
        if se > 0.0:
            z = diff / se
        else:
            z = 0.0 if diff <= 1e-12 else math.inf
        out[name] = FieldComparison(est, exp, emp.std_errors[name], z, z <= z_threshold)
    return ComparisonReport(out, z_threshold)
