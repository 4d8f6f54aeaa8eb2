import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gradlens.data import Dataset, load_digits_dataset, split, subsample
from gradlens.models import TrainConfig, small_cnn_spec
from gradlens.occlusion import (CurveJob, EvalCurve, OcclusionSpec, Retrainer, UndefinedCorrelationError, aoc,
                                auc, curve_from_scores, mu_score, n_occluded, occlude_dataset, occlusion_mask,
                                pearson, spearman, write_curve)


def image_ds(n=6, C=2, H=3, W=3, seed=0):
    rng = np.random.default_rng(seed)
    return Dataset(rng.uniform(-1, 1, (n, C, H, W)), rng.integers(0, 3, n), 3)


def curve(fr, acc, base):
    return EvalCurve(fr, acc, np.asarray(acc)[:, None], base)


# ---------------------------------------------------------------- occlusion

def test_fraction_zero_and_one():
    ds = image_ds()
    scores = np.random.default_rng(1).standard_normal((6, 18))
    np.testing.assert_array_equal(occlude_dataset(ds, scores, 0.0, "ROAR", 0.25).x, ds.x)
    np.testing.assert_array_equal(occlude_dataset(ds, scores, 1.0, "KAR", 0.25).x, 0.25)


def test_occlusion_replaces_all_channels_of_top_pixels():
    ds = image_ds(n=1)
    scores = np.zeros(18)
    scores[4] = 5.0  # pixel 4 of channel 0
    out = occlude_dataset(ds, scores, 1 / 9, "ROAR", [7.0, 8.0]).x
    assert out[0, 0, 1, 1] == 7.0 and out[0, 1, 1, 1] == 8.0
    assert np.sum(out != ds.x) == 2
    np.testing.assert_array_equal(out[0].reshape(2, 9)[:, [0, 1, 2, 3, 5, 6, 7, 8]],
                                  ds.x[0].reshape(2, 9)[:, [0, 1, 2, 3, 5, 6, 7, 8]])


def test_labels_unchanged_and_count_mismatch():
    ds = image_ds()
    s = np.ones((6, 18))
    np.testing.assert_array_equal(occlude_dataset(ds, s, 0.5, "KAR", 0).y, ds.y)
    with pytest.raises(ValueError, match="attributions"):
        occlude_dataset(ds, s[:5], 0.5, "ROAR", 0)


@settings(max_examples=200)
@given(st.integers(1, 40), st.floats(0, 1), st.integers(0, 10_000))
def test_roar_kar_masks_complement(P, f, seed):
    ranks = np.random.default_rng(seed).permutation(P)[None]
    roar = occlusion_mask(ranks, f, "ROAR")[0]
    kar = occlusion_mask(ranks, 1 - f, "KAR")[0]
    # oracle: sets of rank positions, built directly
    k_r, k_k = math.ceil(f * P - 1e-9), math.ceil((1 - f) * P - 1e-9)
    k_r, k_k = min(k_r, P), min(k_k, P)
    expect_r = set(ranks[0, :k_r].tolist())
    expect_k = set(ranks[0, P - k_k:].tolist())
    assert set(np.flatnonzero(roar).tolist()) == expect_r
    assert set(np.flatnonzero(kar).tolist()) == expect_k
    assert np.all(roar | kar)
    assert np.sum(roar & kar) == k_r + k_k - P


def test_n_occluded_rounding():
    assert n_occluded(0.3, 10) == 3
    assert n_occluded(0.1, 64) == 7
    assert n_occluded(1.0, 5) == 5
    assert n_occluded(0.0, 5) == 0


@settings(max_examples=50)
@given(st.sampled_from([0.1, 0.3, 0.5, 0.7, 0.9]), st.sampled_from(["ROAR", "KAR"]), st.integers(0, 1000))
def test_occlusion_idempotent(f, mode, seed):
    ds = image_ds(seed=seed)
    s = np.random.default_rng(seed + 1).standard_normal((6, 18))
    once = occlude_dataset(ds, s, f, mode, -0.1)
    twice = occlude_dataset(once, s, f, mode, -0.1)
    np.testing.assert_array_equal(once.x, twice.x)


def test_spec_validation():
    with pytest.raises(ValueError):
        OcclusionSpec(fractions=(0.5, 0.3))
    with pytest.raises(ValueError):
        OcclusionSpec(fractions=(0.0, 0.5))
    with pytest.raises(ValueError):
        OcclusionSpec(retrains=0)
    with pytest.raises(ValueError):
        OcclusionSpec(mode="DEL")


# ---------------------------------------------------------------- curve scores

def test_auc_examples():
    c = curve([0.1, 0.5, 0.9], [0.7, 0.7, 0.7], 0.7)
    assert auc(c) == pytest.approx(0.63)
    assert aoc(c) == pytest.approx(0.0, abs=1e-15)
    assert auc(curve([0.9], [0.0], 1.0)) == pytest.approx(0.45)


def test_aoc_auc_identity():
    rng = np.random.default_rng(0)
    for _ in range(100):
        fr = np.sort(rng.choice(np.arange(1, 10) / 10, size=5, replace=False))
        c = curve(fr, rng.uniform(0, 1, 5), rng.uniform(0, 1))
        assert abs(aoc(c) + auc(c) - c.baseline * fr[-1]) <= 1e-12


def test_duplicate_points_do_not_change_area():
    c = curve([0.1, 0.5, 0.9], [0.8, 0.6, 0.3], 0.9)
    d = curve([0.1, 0.5, 0.5, 0.9], [0.8, 0.6, 0.6, 0.3], 0.9)
    assert auc(c) == auc(d) and aoc(c) == aoc(d)


def test_unsorted_curve_rejected():
    with pytest.raises(ValueError):
        auc(curve([0.5, 0.1], [0.5, 0.5], 1.0))


def test_mu_definitions():
    fr = [0.1, 0.3, 0.5, 0.7, 0.9]
    rand = curve(fr, [0.9, 0.8, 0.7, 0.6, 0.5], 0.95)
    worse = curve(fr, [0.8, 0.6, 0.5, 0.4, 0.2], 0.95)
    better = curve(fr, [0.95, 0.9, 0.85, 0.8, 0.7], 0.95)
    for metric in ("ROAR", "KAR"):
        assert mu_score(rand, rand, metric).mu == 0.0
    assert mu_score(worse, rand, "ROAR").mu > 0
    assert mu_score(better, rand, "KAR").mu > 0
    with pytest.raises(ValueError):
        mu_score(curve([0.1], [0.5], 1.0), rand, "ROAR")


# ---------------------------------------------------------------- correlations

def brute_rank(v):
    """Average ranks by counting, 1-based."""
    out = []
    for a in v:
        less = sum(1 for b in v if b < a)
        equal = sum(1 for b in v if b == a)
        out.append(less + (equal + 1) / 2)
    return out


def brute_pearson(x, y):
    n = len(x)
    mx, my = math.fsum(x) / n, math.fsum(y) / n
    sxy = math.fsum((a - mx) * (b - my) for a, b in zip(x, y))
    sxx = math.fsum((a - mx) ** 2 for a in x)
    syy = math.fsum((b - my) ** 2 for b in y)
    return sxy / math.sqrt(sxx * syy)


def test_correlations_vs_brute_force():
    rng = np.random.default_rng(0)
    for i in range(100):
        n = int(rng.integers(3, 30))
        if i % 2:
            # integer draws force tied ranks
            x, y = rng.integers(0, 5, n).astype(float), rng.integers(0, 5, n).astype(float)
            if len(set(x)) < 2 or len(set(y)) < 2:
                x[0], y[0] = 10.0, -10.0
        else:
            x, y = rng.standard_normal(n), rng.standard_normal(n)
        assert abs(pearson(x, y) - brute_pearson(list(x), list(y))) <= 1e-12
        assert abs(spearman(x, y) - brute_pearson(brute_rank(list(x)), brute_rank(list(y)))) <= 1e-12


def test_correlation_examples():
    x = np.array([0.0, 1.0, 2.0, 5.0])
    assert pearson(x, 2 * x + 1) == pytest.approx(1.0)
    assert spearman(x, 2 * x + 1) == pytest.approx(1.0)
    assert spearman(x, np.exp(x)) == pytest.approx(1.0)
    assert pearson(x, np.exp(x)) < 1


def test_correlation_errors():
    with pytest.raises(UndefinedCorrelationError):
        pearson([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])
    with pytest.raises(UndefinedCorrelationError):
        spearman([1.0, 2.0, 3.0], [4.0, 4.0, 4.0])
    with pytest.raises(ValueError):
        pearson([1.0], [2.0])
    with pytest.raises(ValueError):
        pearson([1.0, 2.0], [2.0, 3.0, 4.0])


# ---------------------------------------------------------------- retraining

@pytest.fixture(scope="module")
def small_job():
    ds = subsample(load_digits_dataset(), 300, 0)
    tr, te = split(ds, 0.3, 0)
    spec = small_cnn_spec(filters=(4, 4), hidden=16)
    calls = []

    class Counting(Retrainer):
        def __call__(self, a, b, seed):
            calls.append(seed)
            return super().__call__(a, b, seed)

    return CurveJob(tr, te, Counting(spec, TrainConfig(epochs=1)), seeds=(0, 1, 2)), calls


def test_fifteen_retrains_per_curve(small_job):
    job, calls = small_job
    job.baseline()
    before = len(calls)
    rng = np.random.default_rng(0)
    c = curve_from_scores(job, rng.standard_normal((len(job.train), 64)),
                          rng.standard_normal((len(job.test), 64)), OcclusionSpec("ROAR"), "Rand")
    assert len(calls) - before == 15
    assert c.per_seed.shape == (5, 3)
    assert np.all((c.accuracy >= 0) & (c.accuracy <= 1))
    job.baseline()
    assert len(calls) - before == 15  # baseline is cached


def test_write_curve(tmp_path, small_job):
    c = curve([0.1, 0.5], [0.5, 0.25], 0.75)
    c.per_seed = np.array([[0.5], [0.25]])
    c.baseline_per_seed = np.array([0.75])
    c.method, c.mode = "G", "ROAR"
    p = tmp_path / "c.csv"
    write_curve(p, [c])
    lines = p.read_text().splitlines()
    assert lines[0] == "method,mode,fraction,seed,accuracy"
    assert len(lines) == 1 + 3
