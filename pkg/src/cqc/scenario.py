"""Scenario files and the analytic pipeline behind ``analyze`` and ``sweep``.

A scenario fixes the beam splitter, Eve's strategy and the detector, and
optionally pins measured observables or declares a 1-D / 2-D sweep.  See
README.md for the JSON schema.
"""

from __future__ import annotations

import dataclasses
import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .attack import (
    AttackStrategy,
    block_and_probe_strategy,
    identity_strategy,
    observables_from_strategy,
)
from .errors import CQCError, ParameterError, StrategyError
from .imperfections import (
    DetectorModel,
    TimeShiftScenario,
    corrupted_rate_max,
    delta_info_eta,
    effective_efficiency,
    measured_observables,
)
from .keyrate import key_rate, mutual_info_ae
from .protocol import BeamSplitter, Observables

SWEEP_VARIABLES = ("R", "p_e1", "p_e3", "p_D1", "p_D3", "eta", "p_d", "shift")
OBSERVABLE_OVERRIDES = ("p_D1", "p_D2", "p_D3", "p_e1", "p_e2", "p_e3", "p_E4")

CSV_COLUMNS = (
    "p_D1", "p_D2", "p_D3", "p_e1", "p_e3", "qber", "i_ab", "i_ae", "m_k",
    "gamma_cmax", "delta_i_eta", "m_k_prime",
)

NAMED_STRATEGIES = {
    "identity": lambda bs: identity_strategy(),
    "block-and-probe": block_and_probe_strategy,
}


@dataclass(frozen=True)
class SweepAxis:
    variable: str
    start: float
    stop: float
    steps: int

    def __post_init__(self):
        if self.variable not in SWEEP_VARIABLES:
            raise ParameterError(f"sweep variable must be one of {SWEEP_VARIABLES}, got {self.variable!r}")
        if not self.start <= self.stop:
            raise ParameterError("sweep needs from <= to")
        if int(self.steps) != self.steps or self.steps < 2:
            raise ParameterError("sweep needs steps >= 2")

    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, int(self.steps))

    @classmethod
    def from_json_dict(cls, d: Mapping) -> "SweepAxis":
        try:
            return cls(str(d["variable"]), float(d["from"]), float(d["to"]), int(d["steps"]))
        except (KeyError, TypeError) as exc:
            raise ParameterError(f"sweep block needs variable/from/to/steps: {exc}") from None


@dataclass(frozen=True)
class Scenario:
    R: float = 0.5
    strategy: AttackStrategy | str = "identity"
    detector: DetectorModel | None = None
    shift: float = 0.0
    eta: float | None = None
    observables: Mapping[str, float] = field(default_factory=dict)
    sweep: tuple[SweepAxis, ...] = ()

    @property
    def bs(self) -> BeamSplitter:
        return BeamSplitter.from_reflectance(self.R)

    def resolved_strategy(self, bs: BeamSplitter | None = None) -> AttackStrategy:
        if isinstance(self.strategy, AttackStrategy):
            return self.strategy
        return NAMED_STRATEGIES[self.strategy](bs or self.bs)

    @property
    def resolved_detector(self) -> DetectorModel:
        return self.detector if self.detector is not None else DetectorModel.ideal()

    @property
    def efficiency(self) -> float:
        if self.eta is not None:
            return self.eta
        return effective_efficiency(TimeShiftScenario(self.resolved_detector, self.shift))

    @property
    def dark_count(self) -> float:
        return self.resolved_detector.p_d

    @property
    def ideal_detector(self) -> bool:
        return self.efficiency == 1.0 and self.dark_count == 0.0

    def with_value(self, variable: str, value: float) -> "Scenario":
        """Copy of the scenario with one sweep variable pinned."""
        value = float(value)
        if variable == "R":
            return dataclasses.replace(self, R=value)
        if variable == "eta":
            return dataclasses.replace(self, eta=value)
        if variable == "shift":
            return dataclasses.replace(self, shift=value)
        if variable == "p_d":
            return dataclasses.replace(
                self, detector=dataclasses.replace(self.resolved_detector, p_d=value)
            )
        if variable in OBSERVABLE_OVERRIDES:
            return dataclasses.replace(self, observables={**self.observables, variable: value})
        raise ParameterError(f"unknown variable {variable!r}")

    def points(self):
        """Yield ``(values, scenario)`` for every grid point of the sweep."""
        if not self.sweep:
            raise ParameterError("scenario has no sweep block")
        grids = [axis.values() for axis in self.sweep]
        for combo in itertools.product(*grids):
            sc = self
            for axis, v in zip(self.sweep, combo):
                sc = sc.with_value(axis.variable, v)
            yield tuple(float(v) for v in combo), sc

    @classmethod
    def from_json_dict(cls, data: Mapping[str, Any], base_dir: Path | None = None) -> "Scenario":
        if not isinstance(data, Mapping):
            raise ParameterError("scenario must be a JSON object")
        known = {"R", "strategy", "detector", "shift_ns", "eta", "observables", "sweep"}
        extra = set(data) - known
        if extra:
            raise ParameterError(f"unknown scenario keys: {sorted(extra)}")
        base_dir = base_dir or Path(".")

        strategy = data.get("strategy", "identity")
        if isinstance(strategy, str) and strategy not in NAMED_STRATEGIES:
            strategy = AttackStrategy.from_json_dict(_load_json(base_dir / strategy))
        elif isinstance(strategy, Mapping):
            strategy = AttackStrategy.from_json_dict(strategy)
        elif not isinstance(strategy, str):
            raise ParameterError("strategy must be a name, a path or an object")

        detector = data.get("detector", "ideal")
        if detector == "ideal":
            detector = None
        elif isinstance(detector, str):
            detector = DetectorModel.from_json_dict(_load_json(base_dir / detector))
        elif isinstance(detector, Mapping):
            detector = DetectorModel.from_json_dict(detector)
        else:
            raise ParameterError("detector must be 'ideal', a path or an object")

        overrides = dict(data.get("observables") or {})
        bad = set(overrides) - set(OBSERVABLE_OVERRIDES)
        if bad:
            raise ParameterError(f"unknown observables: {sorted(bad)}")

        sweep = data.get("sweep")
        if sweep is None:
            axes = ()
        elif isinstance(sweep, Mapping):
            axes = (SweepAxis.from_json_dict(sweep),)
        elif isinstance(sweep, list) and 1 <= len(sweep) <= 2:
            axes = tuple(SweepAxis.from_json_dict(s) for s in sweep)
        else:
            raise ParameterError("sweep must be an object or a list of one or two objects")

        eta = data.get("eta")
        sc = cls(
            R=float(data.get("R", 0.5)),
            strategy=strategy,
            detector=detector,
            shift=float(data.get("shift_ns", 0.0)),
            eta=None if eta is None else float(eta),
            observables={k: float(v) for k, v in overrides.items()},
            sweep=axes,
        )
        sc.bs  # validates R
        return sc

    @classmethod
    def load(cls, path: str | Path) -> "Scenario":
        path = Path(path)
        return cls.from_json_dict(_load_json(path), path.parent)


def _load_json(path: Path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


@dataclass
class Analysis:
    """Everything the analytic pipeline derives for one scenario point.

    Undefined quantities (no key events, dark-count bound outside its domain) are NaN and
    explained in ``notes``.
    """

    bs: BeamSplitter
    eta: float
    p_d: float
    raw: Observables
    measured: Observables
    qber: float
    i_ab: float
    i_ae: float
    m_k: float
    gamma_cmax: float
    delta_i_eta: float
    notes: list[str] = field(default_factory=list)

    @property
    def delta_m_k(self) -> float:
        return self.gamma_cmax + self.delta_i_eta

    @property
    def m_k_prime(self) -> float:
        return self.m_k - self.delta_m_k

    def row(self) -> dict[str, float]:
        m = self.measured
        return {
            "p_D1": m.p_D1, "p_D2": m.p_D2, "p_D3": m.p_D3, "p_e1": m.p_e1, "p_e3": m.p_e3,
            "qber": self.qber, "i_ab": self.i_ab, "i_ae": self.i_ae, "m_k": self.m_k,
            "gamma_cmax": self.gamma_cmax, "delta_i_eta": self.delta_i_eta,
            "m_k_prime": self.m_k_prime,
        }


def analyze(sc: Scenario) -> Analysis:
    """Run the analytic pipeline: strategy -> observables -> D3 efficiency -> key rates.

    Raises StrategyError for an invalid strategy and ParameterError (or
    InconsistentObservablesError) for observables no strategy can produce.
    """
    bs = sc.bs
    raw = observables_from_strategy(sc.resolved_strategy(bs), bs)
    eta, p_d = sc.efficiency, sc.dark_count
    measured = measured_observables(raw, eta)
    if sc.observables:
        measured = dataclasses.replace(measured, **sc.observables)
    notes = []

    i_ae = mutual_info_ae(measured, bs)
    if measured.p_D1 > 0.0:
        kr = key_rate(measured, bs)
        e, i_ab = kr.qber, kr.i_ab
    else:
        e, i_ab = math.nan, 0.0
        notes.append("p_D1 = 0: no key events, zero-rate branch")

    try:
        gamma = corrupted_rate_max(p_d, measured, bs)
    except CQCError as exc:
        gamma = math.nan
        notes.append(f"dark-count bound undefined: {exc}")
    try:
        d_info = delta_info_eta(eta, measured, bs)
    except CQCError as exc:
        d_info = math.nan
        notes.append(f"efficiency bound undefined: {exc}")

    return Analysis(bs, eta, p_d, raw, measured, e, i_ab, i_ae, i_ab - i_ae, gamma, d_info, notes)


def sweep_rows(sc: Scenario) -> tuple[list[str], list[list[float]]]:
    """Header and rows for the sweep CSV; points outside the model become NaN rows."""
    var_cols = ["var"] if len(sc.sweep) == 1 else ["var", "var2"]
    header = var_cols + list(CSV_COLUMNS)
    rows = []
    for values, point in sc.points():
        try:
            r = analyze(point).row()
            rows.append(list(values) + [r[c] for c in CSV_COLUMNS])
        except StrategyError:
            raise
        except CQCError:
            rows.append(list(values) + [math.nan] * len(CSV_COLUMNS))
    return header, rows
