import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from pitchtrack.signal import Frame
from synthetic import min_sse_partition
from pitchtrack.voicing import (SILENT, UNVOICED, VOICED, DegenerateClassificationError,
                                FeatureConfig, FeatureVector, ClusterModel, classify,
                                extract_features, kmeans_two_class, lda_weight, power_gate,
                                regularized_scatter, within_class_scatter)

FS = 16000
CFG = FeatureConfig(sample_rate=FS, n_low=34, n_high=267)


def frames_with_power(powers):
    return [Frame(i, np.full(4, np.sqrt(p)), p) for i, p in enumerate(powers)]


def test_power_gate_example():
    np.testing.assert_array_equal(power_gate(frames_with_power([1, 1, 1, 0.1]), 0.3),
                                  [False, False, False, True])


def test_power_gate_equal_powers():
    assert not power_gate(frames_with_power([0.5] * 6)).any()


def test_power_gate_zero_signal_is_silent():
    assert power_gate(frames_with_power([0.0] * 5)).all()


def test_silent_frame_features():
    fv = extract_features(np.random.default_rng(0).standard_normal(512), True, CFG)
    np.testing.assert_array_equal(fv.v, -np.ones(5))
    assert fv.is_silent


def test_sine_features():
    t = np.arange(512) / FS
    v = extract_features(np.sin(2 * np.pi * 200 * t + 0.3), False, CFG).v
    assert v[0] >= 0.95
    assert v[1] > 0
    assert v[4] > 0
    # a low tone is also tilted low-pass and loses energy to pre-emphasis
    assert v[2] > 0 and v[3] > 0


def test_white_noise_features_monte_carlo():
    rng = np.random.default_rng(123)
    V = np.array([extract_features(rng.standard_normal(512), False, CFG).v
                  for _ in range(1000)])
    med = np.median(V, axis=0)
    assert med[0] <= 0.05
    assert med[1] < 0


@settings(max_examples=150, deadline=None)
@given(x=arrays(np.float64, 512, elements=st.floats(-1e3, 1e3, allow_nan=False)),
       silent=st.booleans())
def test_features_bounded(x, silent):
    fv = extract_features(x, silent, CFG)
    assert np.all(fv.v >= -1) and np.all(fv.v <= 1)
    if silent:
        np.testing.assert_array_equal(fv.v, -np.ones(5))


def clouds(rng, n0, n1, spread=0.1, d=5):
    X = np.vstack([-np.ones((n0, d)) + spread * rng.standard_normal((n0, d)),
                   np.ones((n1, d)) + spread * rng.standard_normal((n1, d))])
    return X, np.r_[np.zeros(n0, int), np.ones(n1, int)]


def test_kmeans_antipodal_clouds():
    X, truth = clouds(np.random.default_rng(1), 30, 50)
    model = kmeans_two_class(X)
    np.testing.assert_array_equal(model.labels, truth)
    np.testing.assert_allclose(model.m0, X[truth == 0].mean(axis=0))
    np.testing.assert_allclose(model.m1, X[truth == 1].mean(axis=0))
    np.testing.assert_allclose(model.S_w, model.S_w.T)


def test_kmeans_accepts_feature_vectors():
    X, truth = clouds(np.random.default_rng(2), 5, 5)
    model = kmeans_two_class([FeatureVector(v, False) for v in X])
    np.testing.assert_array_equal(model.labels, truth)


def test_kmeans_all_silent_empties_voiced_class():
    X = -np.ones((10, 5))
    with pytest.raises(DegenerateClassificationError) as info:
        kmeans_two_class(X)
    assert info.value.empty_class == 1


def test_kmeans_deterministic():
    X = np.random.default_rng(5).uniform(-1, 1, (200, 5))
    a, b = kmeans_two_class(X), kmeans_two_class(X.copy())
    np.testing.assert_array_equal(a.labels, b.labels)


@pytest.mark.parametrize("seed", range(4))
def test_kmeans_matches_exhaustive_partition(seed):
    rng = np.random.default_rng(seed)
    n1 = int(rng.integers(4, 17))
    X, _ = clouds(rng, 20 - n1, n1, spread=0.3)
    np.testing.assert_array_equal(kmeans_two_class(X).labels, min_sse_partition(X))


def model_from(X, labels):
    m0, m1 = X[labels == 0].mean(0), X[labels == 1].mean(0)
    return ClusterModel(m0, m1, labels, within_class_scatter(X, labels, m0, m1), 1)


def test_lda_identity_scatter():
    model = ClusterModel(-np.ones(5), np.ones(5), np.array([0, 1]), np.eye(5), 1)
    np.testing.assert_allclose(lda_weight(model), np.ones(5) / np.sqrt(5))


@pytest.mark.parametrize("seed", range(5))
def test_lda_matches_fisher_oracle(seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((5, 5))
    X = np.vstack([rng.standard_normal((60, 5)) @ A - 1.0,
                   rng.standard_normal((80, 5)) @ A + rng.uniform(0.5, 2.0, 5)])
    labels = np.r_[np.zeros(60, int), np.ones(80, int)]
    model = model_from(X, labels)
    w = lda_weight(model)
    # generalized eigenproblem S_b v = lambda S_w v, top eigenvector maximises the Fisher ratio
    d = model.m1 - model.m0
    _, vecs = scipy.linalg.eigh(np.outer(d, d), regularized_scatter(model.S_w))
    v = vecs[:, -1] / np.linalg.norm(vecs[:, -1])
    cos = abs(float(w @ v))
    assert np.arccos(min(cos, 1.0)) <= 1e-6
    assert w @ model.m1 > w @ model.m0
    assert np.linalg.norm(w) == pytest.approx(1.0)


def test_lda_singular_scatter():
    model = ClusterModel(np.zeros(5), np.ones(5), np.array([0, 1]), np.zeros((5, 5)), 1)
    with pytest.raises(DegenerateClassificationError):
        lda_weight(model)


def test_classify_examples():
    w = np.ones(5) / np.sqrt(5)
    X = np.vstack([np.ones(5), -np.ones(5), -np.ones(5), np.r_[1, -1, 0, 0, 0]])
    track = classify(X, w, silent=[False, False, True, False])
    np.testing.assert_array_equal(track.labels, [VOICED, UNVOICED, SILENT, UNVOICED])
    assert track.scores[3] == 0.0
    assert track.scores[1] < 0


def test_classify_threshold_shifts_scores():
    w = np.array([1.0, 0, 0, 0, 0])
    X = np.array([[0.2, 0, 0, 0, 0], [0.6, 0, 0, 0, 0]])
    track = classify(X, w, threshold=0.4)
    np.testing.assert_array_equal(track.labels, [UNVOICED, VOICED])
    np.testing.assert_allclose(track.scores, [-0.2, 0.2])


unit = st.floats(-1, 1).filter(lambda v: v == 0 or abs(v) > 1e-100)


@settings(max_examples=100, deadline=None)
@given(X=arrays(np.float64, (20, 5), elements=unit),
       w=arrays(np.float64, 5, elements=unit), k=st.integers(-20, 20))
def test_classify_scale_invariant(X, w, k):
    # power-of-two factors scale every score exactly (away from underflow)
    np.testing.assert_array_equal(classify(X, w).labels, classify(X, 2.0 ** k * w).labels)


def test_classify_scale_invariant_generic():
    rng = np.random.default_rng(8)
    X, w = rng.uniform(-1, 1, (500, 5)), rng.uniform(-1, 1, 5)
    for c in (0.003, 0.7, 13.0, 2e4):
        np.testing.assert_array_equal(classify(X, w).labels, classify(X, c * w).labels)


def test_partition_oracle_agrees_with_naive_loop():
    import itertools

    rng = np.random.default_rng(11)
    X = rng.standard_normal((8, 3))
    best, best_labels = np.inf, None
    for bits in itertools.product((0, 1), repeat=8):
        lab = np.array(bits)
        if lab.min() == lab.max():
            continue
        sse = sum(((X[lab == c] - X[lab == c].mean(0)) ** 2).sum() for c in (0, 1))
        if sse < best - 1e-12:
            best, best_labels = sse, lab
    if X[best_labels == 1].mean() < X[best_labels == 0].mean():
        best_labels = 1 - best_labels
    np.testing.assert_array_equal(min_sse_partition(X), best_labels)
