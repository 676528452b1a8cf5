import math
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from ucascade.calibration import (
    ThresholdPair,
    calibrate,
    compute_threshold,
    gaussian_fit,
    load_thresholds,
    partition,
    save_thresholds,
)
from ucascade.errors import (
    DegeneratePartition,
    EmptyPartition,
    EmptyValidationSet,
    EstimatorMismatch,
    InvalidHyperparameter,
)
from ucascade.runner import calibrate_dataset
from ucascade.uncertainty import UncertaintyScore


def U(v, est="entropy"):
    return UncertaintyScore(v, est)


def test_partition_examples():
    assert partition([(-0.5, -1.0, U(0.3))]).same == (0.3,)
    p = partition([(0.5, -0.5, U(0.9))])
    assert (p.same, p.opposite) == ((), (0.9,))
    # neutral prediction against a positive truth disagrees
    p = partition([(0.0, 0.3, U(0.7))])
    assert (p.same, p.opposite) == ((), (0.7,))
    assert partition([(0.0, 0.0, U(0.2))]).same == (0.2,)


def test_partition_errors():
    with pytest.raises(EmptyValidationSet):
        partition([])
    with pytest.raises(EstimatorMismatch):
        partition([(1.0, 1.0, U(0.1)), (1.0, 1.0, U(0.1, "ptd"))])


def test_partition_sizes_add_up():
    rng = random.Random(1)
    recs = [(rng.uniform(-3, 3), rng.uniform(-3, 3), U(rng.random())) for _ in range(300)]
    p = partition(recs)
    assert len(p.same) + len(p.opposite) == 300


def test_gaussian_fit_examples():
    f = gaussian_fit([1, 1, 1])
    assert (f.mu, f.sigma, f.n) == (1.0, 0.0, 3)
    f = gaussian_fit([0, 2])
    assert (f.mu, f.sigma, f.n) == (1.0, 1.0, 2)
    f = gaussian_fit([0.2, 0.4, 0.9])
    assert f.mu == pytest.approx(0.5, abs=1e-15)
    assert f.sigma == pytest.approx(0.29439202887759490, abs=1e-12)
    with pytest.raises(EmptyPartition):
        gaussian_fit([])


def test_compute_threshold_identities():
    assert compute_threshold(0.4, 0.8, 0.5, 0.0) == pytest.approx(0.6, abs=1e-15)
    assert compute_threshold(0.5, 123.0, 0.0, 0.1) == pytest.approx(0.6, abs=1e-15)
    assert compute_threshold(0.3, 0.9, 1.0, 0.0) == 0.9
    for lam in (-0.1, 1.1):
        with pytest.raises(InvalidHyperparameter):
            compute_threshold(0.3, 0.9, lam, 0.0)


means = st.floats(0, 5, allow_nan=False)
lams = st.floats(0, 1)


@given(means, means, lams, lams)
def test_threshold_monotone_in_lambda(a, b, l1, l2):
    lo, hi = min(a, b), max(a, b)
    l1, l2 = sorted((l1, l2))
    assert compute_threshold(lo, hi, l1, 0) <= compute_threshold(lo, hi, l2, 0) + 1e-12


@given(means, lams)
def test_threshold_equal_means(m, lam):
    assert compute_threshold(m, m, lam, 0) == pytest.approx(m, abs=1e-12)


@given(means, means, lams)
def test_threshold_between_means(a, b, lam):
    t = compute_threshold(a, b, lam, 0)
    assert min(a, b) - 1e-12 <= t <= max(a, b) + 1e-12


def _synthetic_records(mu_same, mu_opp):
    recs = []
    for d in (-0.1, 0.1):
        recs.append((1.0, 2.0, U(mu_same + d)))
        recs.append((-1.0, 2.0, U(mu_opp + d)))
    return recs


def test_calibrate_composes():
    pair = calibrate(_synthetic_records(0.4, 0.8), _synthetic_records(0.3, 0.7), 0.5, 0.0)
    assert pair.tau1 == pytest.approx(0.6, abs=1e-12)
    assert pair.tau2 == pytest.approx(0.5, abs=1e-12)
    assert pair.small.n_same == 2


def test_calibrate_permutation_invariant():
    rng = random.Random(5)
    recs = [(rng.uniform(-3, 3), rng.uniform(-3, 3), U(rng.random())) for _ in range(100)]
    a = calibrate(recs, recs)
    shuffled = recs[:]
    rng.shuffle(shuffled)
    b = calibrate(shuffled, shuffled)
    assert a.tau1 == pytest.approx(b.tau1, abs=1e-14)


def test_all_correct_is_degenerate():
    recs = [(1.0, 1.0, U(0.1)), (-1.0, -2.0, U(0.2))]
    with pytest.raises(DegeneratePartition):
        calibrate(recs, recs)


def test_engineered_fixture(calibration_set):
    pair = calibrate_dataset(calibration_set)
    assert abs(pair.tau1 - 0.59) <= 1e-9
    assert abs(pair.tau2 - 0.48) <= 1e-9
    assert pair.small.mu_same == pytest.approx(0.34, abs=1e-9)
    assert pair.large.mu_opposite == pytest.approx(0.74, abs=1e-9)


def test_artifact_roundtrip(tmp_path, calibration_set):
    pair = calibrate_dataset(calibration_set, fingerprint="sha256:abc")
    path = tmp_path / "cal.json"
    save_thresholds(pair, path)
    back = load_thresholds(path)
    assert back == pair
    assert back.small == pair.small
    assert back.fingerprint == "sha256:abc"


def test_threshold_pair_validation():
    with pytest.raises(InvalidHyperparameter):
        ThresholdPair(0.1, 0.2, lam=2.0)
    assert ThresholdPair(math.inf, 0.2).with_overrides(tau2=0.3).tau2 == 0.3
