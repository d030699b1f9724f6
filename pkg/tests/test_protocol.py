import math

import pytest
from hypothesis import given, strategies as st

from cqc.errors import InvalidConfigurationError, ParameterError
from cqc.protocol import (
    BeamSplitter,
    CaseLabel,
    Detector,
    DetectorOutcome,
    Observables,
    Polarization,
    classify_case,
    ideal_observables,
    supposed_outcome_distribution,
)

from oracles import enumerate_observables

H, V = Polarization.H, Polarization.V

IDENTITY = {
    "c1": {"p00": 1}, "c2": {"0p0": 1}, "c3": {"0p0": 1}, "c4": {"00p": 1}, "c5": {"0p0": 1},
}

reflectance = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)


@pytest.mark.parametrize(
    "R, expected",
    [
        (0.5, (0.125, 0.625, 0.25)),
        (0.0, (0.0, 0.5, 0.5)),
        (0.3, (0.105, 0.545, 0.35)),
    ],
)
def test_ideal_observables_examples(R, expected):
    obs = ideal_observables(BeamSplitter.from_reflectance(R))
    assert (obs.p_D1, obs.p_D2, obs.p_D3) == pytest.approx(expected, abs=1e-12)
    assert obs.p_e1 == obs.p_e2 == obs.p_e3 == obs.p_E4 == 0.0


@pytest.mark.parametrize("R", ["0", "3/10", "1/2", "7/10", "1"])
def test_ideal_observables_match_branch_enumeration(R):
    from fractions import Fraction

    exact = enumerate_observables(IDENTITY, Fraction(R))
    obs = ideal_observables(BeamSplitter.from_reflectance(float(Fraction(R))))
    for name in ("p_D1", "p_D2", "p_D3"):
        assert getattr(obs, name) == pytest.approx(float(exact[name]), abs=1e-12)


def test_click_probabilities_sum_to_one_on_grid():
    for i in range(101):
        obs = ideal_observables(BeamSplitter.from_reflectance(i / 100))
        assert abs(obs.p_D1 + obs.p_D2 + obs.p_D3 - 1.0) <= 1e-12


@pytest.mark.parametrize(
    "args, case",
    [
        ((H, H, False, Detector.D1), CaseLabel.C1),
        ((V, V, False, Detector.D2), CaseLabel.C2),
        ((H, V, False, Detector.D2), CaseLabel.C3),
        ((V, V, True, Detector.D3), CaseLabel.C4),
        ((H, V, True, Detector.D2), CaseLabel.C5),
    ],
)
def test_classify_case(args, case):
    assert classify_case(*args) is case


@pytest.mark.parametrize(
    "args",
    [
        (H, H, False, Detector.D3),
        (H, V, False, Detector.D1),
        (H, H, True, Detector.D1),
        (H, V, True, Detector.D3),
    ],
)
def test_classify_case_rejects_impossible_configurations(args):
    with pytest.raises(InvalidConfigurationError):
        classify_case(*args)


def test_supposed_distribution_examples():
    bs = BeamSplitter.from_reflectance(0.5)
    assert dict(supposed_outcome_distribution(bs, H, H)) == pytest.approx(
        {CaseLabel.C1: 0.25, CaseLabel.C2: 0.25, CaseLabel.C4: 0.5}
    )
    bs = BeamSplitter.from_reflectance(0.0)
    dist = {k: v for k, v in supposed_outcome_distribution(bs, V, V) if v > 0}
    assert dist == {CaseLabel.C4: 1.0}


@given(reflectance)
def test_supposed_distribution_mismatch_is_R_T(R):
    bs = BeamSplitter.from_reflectance(R)
    assert dict(supposed_outcome_distribution(bs, H, V)) == {CaseLabel.C3: bs.R, CaseLabel.C5: bs.T}


@given(reflectance, st.sampled_from([H, V]), st.sampled_from([H, V]))
def test_supposed_distribution_is_a_distribution(R, p, q):
    weights = [w for _, w in supposed_outcome_distribution(BeamSplitter.from_reflectance(R), p, q)]
    assert all(w >= 0 for w in weights)
    assert math.fsum(weights) == pytest.approx(1.0, abs=1e-12)


def test_beam_splitter_validation():
    with pytest.raises(ParameterError):
        BeamSplitter(0.4, 0.4)
    with pytest.raises(ParameterError):
        BeamSplitter.from_reflectance(1.5)
    with pytest.raises(ParameterError):
        ideal_observables(0.5)


def test_detector_outcome_multi_click():
    assert not DetectorOutcome().multi_click
    assert not DetectorOutcome("H", "0", "0").multi_click
    assert DetectorOutcome("H", "V", "0").multi_click
    with pytest.raises(ParameterError):
        DetectorOutcome("X")


def test_observables_invariants():
    with pytest.raises(ParameterError):
        Observables(0.1, 0.5, 0.2, p_e1=0.2)
    with pytest.raises(ParameterError):
        Observables(0.5, 0.5, 0.2)
    with pytest.raises(ParameterError):
        Observables(-0.1, 0.5, 0.2)
