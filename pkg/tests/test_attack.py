from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cqc.attack import (
    AttackStrategy,
    CaseWeights,
    Knowledge,
    ViolationKind,
    block_and_probe_strategy,
    eve_knowledge,
    identity_strategy,
    observables_from_strategy,
    restrict_noiseless,
    sample_noiseless_strategy,
    solve_strategy,
    validate_strategy,
)
from cqc.errors import DegenerateCaseError, ParameterError, StrategyError
from cqc.protocol import BeamSplitter, CaseLabel, Observables, ideal_observables

from oracles import enumerate_observables

BS = BeamSplitter.from_reflectance(0.5)

reflectance = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)
seeds = st.integers(min_value=0, max_value=2**32 - 1)


def with_case(s, **cases):
    d = {label.value.lower(): s.case(label) for label in CaseLabel}
    d.update({k: CaseWeights(v) for k, v in cases.items()})
    return AttackStrategy(**d)


def test_identity_equals_ideal_on_grid():
    s = identity_strategy()
    for i in range(101):
        bs = BeamSplitter.from_reflectance(i / 100)
        got = observables_from_strategy(s, bs).as_dict()
        want = ideal_observables(bs).as_dict()
        assert max(abs(got[k] - want[k]) for k in got) <= 1e-12
        assert validate_strategy(s, bs) == []


def test_identity_c4_knowledge():
    c4 = identity_strategy().c4
    assert c4.to_dict() == {"00p": 1.0}
    assert eve_knowledge(CaseLabel.C4, "00p") is Knowledge.P_KNOWN
    assert eve_knowledge(CaseLabel.C1, "p00") is Knowledge.NONE
    assert eve_knowledge(CaseLabel.C3, "0pp") is Knowledge.NONE


def test_validate_ratio_violation():
    bs = BeamSplitter.from_reflectance(0.3)
    s = with_case(identity_strategy(), c4={"p00": 0.5, "0p0": 0.5})
    (v,) = validate_strategy(s, bs)
    assert v.kind is ViolationKind.BS_RATIO_BROKEN
    assert v.case is CaseLabel.C4
    assert v.magnitude == pytest.approx(0.2, abs=1e-12)


def test_validate_normalization_violation():
    s = with_case(identity_strategy(), c1={"p00": 0.9})
    (v,) = validate_strategy(s, BS)
    assert (v.kind, v.case) == (ViolationKind.NOT_NORMALIZED, CaseLabel.C1)
    assert v.magnitude == pytest.approx(0.1, abs=1e-12)


def test_validate_negative_and_unsupported():
    s = with_case(identity_strategy(), c2={"0p0": 1.2, "multi": -0.2}, c5={"00p": 1.0})
    kinds = {(v.kind, v.case) for v in validate_strategy(s, BS)}
    assert (ViolationKind.NEGATIVE_WEIGHT, CaseLabel.C2) in kinds
    assert (ViolationKind.UNSUPPORTED_OUTCOME, CaseLabel.C5) in kinds


@pytest.mark.parametrize(
    "case, label, ok",
    [
        ("c1", "pp0", True),
        ("c1", "0pp", False),
        ("c2", "0pp", True),
        ("c2", "p0p", False),
        ("c3", "pqp", True),
        ("c3", "pq0", False),
        ("c4", "multi", False),
        ("c5", "00p", False),
    ],
)
def test_multi_click_support(case, label, ok):
    base = {"c1": "p00", "c2": "0p0", "c3": "0p0"}.get(case, "0p0")
    s = with_case(identity_strategy(), **{case: {base: 0.5, label: 0.5}})
    bad = [v for v in validate_strategy(s, BS) if v.kind is ViolationKind.UNSUPPORTED_OUTCOME]
    assert (not bad) == ok


def test_bad_label_is_a_parameter_error():
    with pytest.raises(ParameterError):
        CaseWeights({"p0": 1.0})


@given(seeds, reflectance)
def test_doubled_weights_are_rejected(seed, R):
    bs = BeamSplitter.from_reflectance(R)
    s = sample_noiseless_strategy(np.random.default_rng(seed), bs)
    doubled = AttackStrategy(
        **{label.value.lower(): CaseWeights({k: 2 * w for k, w in cw.table.items()}) for label, cw in s.items()}
    )
    kinds = {v.kind for v in validate_strategy(doubled, bs)}
    assert ViolationKind.NOT_NORMALIZED in kinds
    with pytest.raises(StrategyError):
        observables_from_strategy(doubled, bs)


def test_restrict_noiseless_examples():
    s = identity_strategy()
    assert restrict_noiseless(s, BS) == s
    s = with_case(identity_strategy(), c1={"p00": 0.8, "pp0": 0.2})
    assert restrict_noiseless(s, BS).c1.to_dict() == pytest.approx({"p00": 1.0})
    s = with_case(identity_strategy(), c3={"ppp": 1.0})
    with pytest.raises(DegenerateCaseError):
        restrict_noiseless(s, BS)


def test_block_and_probe_observables():
    obs = observables_from_strategy(block_and_probe_strategy(BS), BS)
    assert obs.p_D1 == pytest.approx(0.25, abs=1e-12)
    assert obs.p_D3 == obs.p_e1 == obs.p_e3 == 0.0


def _exact(s: AttackStrategy, R: Fraction):
    table = {k: {label: Fraction(w) for label, w in v.items()} for k, v in s.to_json_dict().items()}
    return {k: float(v) for k, v in enumerate_observables(table, R).items()}


@settings(max_examples=200)
@given(seeds, st.integers(min_value=0, max_value=100))
def test_forward_map_matches_branch_enumeration(seed, r100):
    R = Fraction(r100, 100)
    bs = BeamSplitter.from_reflectance(float(R))
    rng = np.random.default_rng(seed)
    s = sample_noiseless_strategy(rng, bs)
    m = rng.uniform(0, 0.3, 3)
    s = with_case(
        s,
        c1={"p00": 1 - m[0], "pp0": m[0] / 2, "p0q": m[0] / 2},
        c2={"0p0": 1 - m[1], "multi": m[1]},
        c3={"p00": s.c3["p00"] * (1 - m[2]), "0p0": s.c3["0p0"] * (1 - m[2]), "0pq": m[2]},
    )
    got = observables_from_strategy(s, bs).as_dict()
    want = _exact(s, R)
    for k in got:
        assert got[k] == pytest.approx(want[k], abs=1e-12), k


@given(seeds, reflectance)
def test_noiseless_strategies_have_no_multi_clicks(seed, R):
    bs = BeamSplitter.from_reflectance(R)
    obs = observables_from_strategy(sample_noiseless_strategy(np.random.default_rng(seed), bs), bs)
    assert obs.p_E4 == 0.0
    assert obs.p_e1 <= obs.p_D1
    assert obs.p_e3 <= obs.p_D3
    assert obs.p_e2 == 0.0


@given(seeds, reflectance, st.floats(min_value=0, max_value=1))
def test_forward_map_is_affine(seed, R, lam):
    bs = BeamSplitter.from_reflectance(R)
    rng = np.random.default_rng(seed)
    s1, s2 = sample_noiseless_strategy(rng, bs), sample_noiseless_strategy(rng, bs)
    mix = AttackStrategy(
        **{
            label.value.lower(): CaseWeights(
                {k: lam * s1.case(label)[k] + (1 - lam) * s2.case(label)[k]
                 for k in set(s1.case(label).table) | set(s2.case(label).table)}
            )
            for label in CaseLabel
        }
    )
    o1, o2, om = (observables_from_strategy(s, bs).as_dict() for s in (s1, s2, mix))
    for k in om:
        assert om[k] == pytest.approx(lam * o1[k] + (1 - lam) * o2[k], abs=1e-12)


def test_solve_ideal_target():
    res = solve_strategy(ideal_observables(BS), BS, 1e-9)
    assert res.feasible and res.residual <= 1e-9
    assert validate_strategy(res.strategy, BS) == []


def test_solve_block_and_probe_roundtrip():
    target = observables_from_strategy(block_and_probe_strategy(BS), BS)
    res = solve_strategy(target, BS, 1e-9)
    assert res.feasible and res.residual <= 1e-9


def test_solve_rejects_p_e2():
    target = Observables(0.125, 0.615, 0.25, p_e2=0.01)
    res = solve_strategy(target, BS, 1e-9)
    assert not res.feasible
    assert res.residual == pytest.approx(0.01, abs=1e-9)


def test_solve_parameter_errors():
    with pytest.raises(ParameterError):
        solve_strategy(ideal_observables(BS), BS, 0.0)
    with pytest.raises(ParameterError):
        solve_strategy({"p_D1": 0.1}, BS)


def test_solve_is_deterministic():
    target = observables_from_strategy(sample_noiseless_strategy(np.random.default_rng(5), BS), BS)
    a, b = solve_strategy(target, BS), solve_strategy(target, BS)
    assert a.strategy == b.strategy


def test_solve_roundtrip_1000_random_strategies():
    rng = np.random.default_rng(20240611)
    worst = 0.0
    for _ in range(1000):
        bs = BeamSplitter.from_reflectance(rng.random())
        s = sample_noiseless_strategy(rng, bs)
        res = solve_strategy(observables_from_strategy(s, bs), bs, 1e-6)
        assert validate_strategy(res.strategy, bs) == []
        worst = max(worst, res.residual)
    assert worst <= 1e-6


def test_json_roundtrip():
    s = with_case(block_and_probe_strategy(BS), c1={"p00": 0.9, "multi": 0.1})
    assert AttackStrategy.from_json_dict(s.to_json_dict()) == s
    partial = AttackStrategy.from_json_dict({"c4": {"p00": 0.5, "0p0": 0.5}})
    assert partial.c1 == identity_strategy().c1
    with pytest.raises(ParameterError):
        AttackStrategy.from_json_dict({"c6": {}})
