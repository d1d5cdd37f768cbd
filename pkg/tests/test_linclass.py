import numpy as np
import pytest

from progressftx import (GmModel, PartialFeatureVector, binary_entropy,
                         classify, differential_distance, entropy,
                         half_mahalanobis, posteriors, synth_model,
                         with_features)

LN2 = np.log(2.0)


@pytest.fixture
def toy_model():
    return GmModel(centroids=np.array([[0.0, 0.0], [2.0, 2.0]]),
                   variances=np.array([1.0, 4.0]))


@pytest.fixture
def binary_g4():
    # one dimension, centroids at -1 and +1, unit variance: gain 4
    return synth_model(2, 1, np.array([4.0]))


def test_half_mahalanobis_empty_is_zero(toy_model):
    pfv = PartialFeatureVector.empty()
    assert half_mahalanobis(pfv, toy_model, 1) == 0.0
    assert half_mahalanobis(pfv, toy_model, 2) == 0.0


def test_half_mahalanobis_own_centroid(toy_model):
    pfv = PartialFeatureVector(values={1: 2.0, 2: 2.0})
    assert half_mahalanobis(pfv, toy_model, 2) == 0.0


def test_half_mahalanobis_hand_value(toy_model):
    # x=(1,1) vs centroid (0,0) with variances (1,4): 0.5*(1 + 0.25)
    pfv = PartialFeatureVector(values={1: 1.0, 2: 1.0})
    assert half_mahalanobis(pfv, toy_model, 1) == pytest.approx(0.625, abs=1e-15)


def test_classify_empty_tie_breaks_low(toy_model):
    assert classify(PartialFeatureVector.empty(), toy_model) == 1


def test_classify_centroid_membership():
    model = synth_model(2, 4, np.full(4, 9.0))
    pfv = PartialFeatureVector.from_sample(model.centroids[1], range(1, 5))
    assert classify(pfv, model) == 2


def test_classify_hand_case(binary_g4):
    pfv = PartialFeatureVector(values={1: 0.2})
    assert half_mahalanobis(pfv, binary_g4, 1) == pytest.approx(0.72)
    assert half_mahalanobis(pfv, binary_g4, 2) == pytest.approx(0.32)
    assert classify(pfv, binary_g4) == 2
    assert differential_distance(pfv, binary_g4) == pytest.approx(0.4, abs=1e-14)


def test_posteriors_uniform_on_empty(toy_model):
    np.testing.assert_allclose(posteriors(PartialFeatureVector.empty(), toy_model),
                               [0.5, 0.5])


def test_posteriors_logistic_value():
    # delta = 2 -> probabilities (1/(1+e^-2) complement): logistic evaluation
    model = GmModel(centroids=np.array([[0.0], [2.0]]), variances=np.array([1.0]))
    pfv = PartialFeatureVector(values={1: 0.0})
    # z1 = 0, z2 = 2 -> delta = -2, class 1 favored
    p = posteriors(pfv, model)
    np.testing.assert_allclose(p, [0.880797077978, 0.119202922022], atol=1e-10)
    assert p.sum() == pytest.approx(1.0, abs=1e-12)


def test_entropy_matches_definition(toy_model):
    rng = np.random.default_rng(5)
    for _ in range(200):
        pfv = PartialFeatureVector(
            values={1: rng.normal(), 2: rng.normal(scale=2.0)})
        p = posteriors(pfv, toy_model)
        direct = -np.sum(p * np.log(p))
        assert entropy(pfv, toy_model) == pytest.approx(direct, abs=1e-10)


def test_entropy_values():
    assert binary_entropy(0.0) == pytest.approx(LN2, abs=1e-15)
    # high-precision evaluation of log(1+e^-5) + 5/(e^5+1)
    assert binary_entropy(5.0) == pytest.approx(0.0401796031105, abs=1e-10)
    model = synth_model(2, 1, np.array([1.0]))
    assert entropy(PartialFeatureVector.empty(), model) == pytest.approx(LN2)


@pytest.mark.parametrize("d", [0.5, 1.0, 3.0])
def test_binary_entropy_even(d):
    assert binary_entropy(d) == pytest.approx(binary_entropy(-d), abs=1e-14)


def test_binary_entropy_monotone_decreasing():
    d = np.linspace(0.0, 40.0, 400)
    vals = np.array([binary_entropy(x) for x in d])
    assert np.all(np.diff(vals) < 0)
    assert vals[0] == pytest.approx(LN2)


def test_binary_entropy_matches_state_entropy():
    model = synth_model(2, 6, np.linspace(0.5, 3.0, 6))
    rng = np.random.default_rng(6)
    for _ in range(10_000):
        k = rng.integers(0, 7)
        idx = rng.choice(6, size=k, replace=False) + 1
        pfv = PartialFeatureVector(
            values={int(n): float(rng.normal(scale=2.0)) for n in idx})
        d = differential_distance(pfv, model)
        assert entropy(pfv, model) == pytest.approx(binary_entropy(d), abs=1e-10)


def test_no_overflow_at_extreme_distances():
    model = GmModel(centroids=np.array([[0.0], [2.0]]), variances=np.array([1.0]))
    for x in (-700.0, 700.0):
        pfv = PartialFeatureVector(values={1: x})
        p = posteriors(pfv, model)
        assert np.isfinite(p).all()
        assert p.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.isfinite(entropy(pfv, model))
    assert binary_entropy(700.0) == 0.0  # underflows cleanly, not NaN


def test_classify_invariant_to_common_offset():
    # receiving a dimension whose centroids coincide shifts every distance
    # equally and must not change the decision or the posteriors
    centroids = np.array([[0.0, 5.0], [2.0, 5.0]])
    model = GmModel(centroids=centroids, variances=np.array([1.0, 1.0]))
    pfv_one = PartialFeatureVector(values={1: 0.3})
    pfv_two = PartialFeatureVector(values={1: 0.3, 2: 9.0})
    assert classify(pfv_one, model) == classify(pfv_two, model)
    np.testing.assert_allclose(posteriors(pfv_one, model),
                               posteriors(pfv_two, model), atol=1e-12)


def test_operations_do_not_mutate_inputs(toy_model):
    pfv = PartialFeatureVector(values={1: 0.7})
    before = entropy(pfv, toy_model)
    extended = with_features(pfv, np.array([0.7, 3.0]), [2])
    assert entropy(pfv, toy_model) == before
    assert pfv.received_set == frozenset({1})
    assert extended.received_set == frozenset({1, 2})


def test_partial_vector_validation():
    with pytest.raises(ValueError):
        PartialFeatureVector(values={1: 0.0}, received_set=frozenset({1, 2}))
    with pytest.raises(ValueError):
        PartialFeatureVector(values={0: 1.0})
    with pytest.raises(ValueError):
        with_features(PartialFeatureVector(values={1: 0.0}), np.zeros(3), [1])
    with pytest.raises(ValueError):
        differential_distance(PartialFeatureVector.empty(),
                              synth_model(2, 1, np.ones(1)), (1, 1))


def test_out_of_range_feature_index(toy_model):
    pfv = PartialFeatureVector(values={5: 1.0})
    with pytest.raises(IndexError):
        half_mahalanobis(pfv, toy_model, 1)
