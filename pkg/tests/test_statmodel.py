import numpy as np
import pytest

from progressftx import (GmModel, build_gain_table, classify, default_gain_profile,
                         entropy, load_model, sample, save_model, synth_model)
from progressftx.linclass import PartialFeatureVector


def test_vanishing_variance_limit():
    model = GmModel(centroids=np.array([[1.0, -2.0], [3.0, 4.0]]),
                    variances=np.full(2, 1e-12))
    rng = np.random.default_rng(0)
    s = sample(model, rng, forced_label=1)
    assert s.label == 1
    np.testing.assert_allclose(s.features, [1.0, -2.0], atol=1e-4)


def test_uniform_prior_frequency():
    model = synth_model(2, 1, np.array([4.0]))
    rng = np.random.default_rng(1)
    labels = np.array([sample(model, rng).label for _ in range(100_000)])
    freq = np.mean(labels == 1)
    assert 0.494 <= freq <= 0.506


def test_class_conditional_mean():
    # Monte Carlo sample-mean oracle: mean of class-2 draws approaches its centroid
    model = GmModel(centroids=np.array([[0.0], [2.0]]), variances=np.array([1.0]))
    rng = np.random.default_rng(2)
    n = 20_000
    vals = np.array([sample(model, rng, forced_label=2).features[0]
                     for _ in range(n)])
    assert abs(vals.mean() - 2.0) <= 3.0 / np.sqrt(n)


def test_sampling_deterministic_given_seed():
    model = synth_model(2, 8, default_gain_profile(8))
    a = [sample(model, np.random.default_rng(42)) for _ in range(5)]
    b = [sample(model, np.random.default_rng(42)) for _ in range(5)]
    for sa, sb in zip(a, b):
        assert sa.label == sb.label
        np.testing.assert_array_equal(sa.features, sb.features)


def test_synth_binary_construction_identity():
    model = synth_model(2, 1, np.array([4.0]))
    np.testing.assert_allclose(model.centroids, [[-1.0], [1.0]], atol=1e-15)
    np.testing.assert_array_equal(model.variances, [1.0])


def test_synth_zero_profile_is_uninformative():
    model = synth_model(3, 4, np.zeros(4))
    assert np.ptp(model.centroids, axis=0).max() == 0.0
    rng = np.random.default_rng(3)
    s = sample(model, rng)
    pfv = PartialFeatureVector.from_sample(s.features, range(1, 5))
    assert entropy(pfv, model) == pytest.approx(np.log(3), abs=1e-12)
    assert classify(pfv, model) == 1  # tie-break


@pytest.mark.parametrize("L", [2, 3, 5])
def test_synth_profile_reproduced_by_gain_table(L):
    profile = default_gain_profile(40, 8.0, 0.85)
    model = synth_model(L, 40, profile)
    table = build_gain_table(model)
    np.testing.assert_allclose(table.per_dim, profile, rtol=0, atol=1e-12)


def test_model_file_round_trip(tmp_path):
    model = synth_model(3, 7, default_gain_profile(7))
    path = tmp_path / "model.json"
    save_model(model, path)
    back = load_model(path)
    np.testing.assert_array_equal(back.centroids, model.centroids)
    np.testing.assert_array_equal(back.variances, model.variances)


def test_model_file_shape_errors(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"L": 2, "N": 3, "centroids": [[1, 2], [3, 4]], '
                    '"variances": [1, 1, 1]}')
    with pytest.raises(ValueError, match="shape"):
        load_model(path)
    path.write_text('{"L": 2, "centroids": [[1], [2]]}')
    with pytest.raises(ValueError, match="missing keys"):
        load_model(path)


def test_validation():
    with pytest.raises(ValueError):
        GmModel(centroids=np.zeros((1, 3)), variances=np.ones(3))
    with pytest.raises(ValueError):
        GmModel(centroids=np.zeros((2, 3)), variances=np.array([1.0, 0.0, 1.0]))
    with pytest.raises(ValueError):
        synth_model(2, 3, np.array([1.0, -0.5, 2.0]))
    with pytest.raises(ValueError):
        sample(synth_model(2, 1, np.ones(1)), np.random.default_rng(0),
               forced_label=3)
