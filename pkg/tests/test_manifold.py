import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gradlens.data import Dataset, gen_toy, load_digits_dataset, split, subsample
from gradlens.manifold import (AllAttacksFailedError, Projector, d_pi, distance_distribution, fit_pca,
                               load_projector, project, project_latent_opt, save_projector, train_autoencoder)
from gradlens.models import TrainConfig


def axis_projector():
    return Projector("PCA", (2,), mean=np.zeros(2), components=np.array([[1.0, 0.0]]))


def test_coordinate_projection_example():
    p = axis_projector()
    np.testing.assert_array_equal(project(p, np.array([3.0, 4.0])), [3.0, 0.0])
    assert d_pi(p, np.array([3.0, 4.0])) == 4.0
    assert d_pi(p, np.array([-2.0, 0.0])) == 0.0


def test_toy_pca_major_axis():
    ds = gen_toy()
    p = fit_pca(ds, k=1)
    assert p.explained_variance_ratio[0] > 0.95
    # the eigenvalue oracle: the top eigenvector of the sample covariance
    w, v = np.linalg.eigh(np.cov(ds.x.T))
    assert abs(abs(p.components[0] @ v[:, -1]) - 1) < 1e-12
    assert p.components[0, np.abs(p.components[0]).argmax()] > 0


def test_pca_full_rank_is_identity():
    x = np.random.default_rng(0).standard_normal((50, 5))
    p = fit_pca(x, k=5)
    assert np.all(d_pi(p, x) < 1e-10)


def test_pca_components_orthonormal():
    p = fit_pca(load_digits_dataset())
    c = p.components
    np.testing.assert_allclose(c @ c.T, np.eye(len(c)), atol=1e-10)
    assert np.sum(p.explained_variance_ratio) >= 0.95


def test_pca_errors():
    x = np.random.default_rng(0).standard_normal((10, 3))
    with pytest.raises(ValueError):
        fit_pca(x, k=4)
    with pytest.raises(ValueError):
        fit_pca(np.ones((10, 3)), k=1)
    with pytest.raises(ValueError):
        fit_pca(np.zeros((0, 3)))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 6))
def test_pca_projection_properties(seed, k):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((30, 6)) @ rng.standard_normal((6, 6))
    p = fit_pca(x, k=k)
    q = rng.standard_normal((10, 6)) * 3
    xh = project(p, q)
    np.testing.assert_allclose(project(p, xh), xh, atol=1e-10)
    assert np.all(d_pi(p, xh) <= 1e-10)
    assert np.all(np.linalg.norm(xh - p.mean, axis=1) <= np.linalg.norm(q - p.mean, axis=1) + 1e-10)
    d = d_pi(p, q)
    assert np.all(d >= 0)
    np.testing.assert_allclose(d, [np.sqrt(np.sum((a - b) ** 2)) for a, b in zip(q, xh)], rtol=0, atol=1e-12)


def test_projection_shape_mismatch():
    with pytest.raises(ValueError):
        project(axis_projector(), np.zeros((4, 3)))


@pytest.fixture(scope="module")
def autoencoder():
    ds = subsample(load_digits_dataset(), 600, 0)
    tr, te = split(ds, 0.25, 0)
    p = train_autoencoder(tr, zdim=10, cfg=TrainConfig(epochs=15, seed=0), hidden=(64,))
    return p, tr, te


def test_autoencoder_beats_mean_image(autoencoder):
    p, tr, te = autoencoder
    err = np.abs(project(p, te.x) - te.x).mean()
    baseline = np.abs(tr.x.mean(axis=0) - te.x).mean()
    assert err < baseline
    assert np.all(np.isfinite(p.history))


def test_autoencoder_deterministic():
    ds = Dataset(np.random.default_rng(0).uniform(-1, 1, (40, 6)), np.zeros(40, int), 1)
    a = train_autoencoder(ds, 3, TrainConfig(epochs=2, seed=5), hidden=(8,))
    b = train_autoencoder(ds, 3, TrainConfig(epochs=2, seed=5), hidden=(8,))
    np.testing.assert_array_equal(project(a, ds.x), project(b, ds.x))


def test_autoencoder_zdim_validation():
    ds = Dataset(np.zeros((4, 3)), np.zeros(4, int), 1)
    with pytest.raises(ValueError):
        train_autoencoder(ds, 0)


def test_latent_opt_never_worse(autoencoder):
    p, _, te = autoencoder
    x = te.x[:40]
    plain = d_pi(p, x)
    opt = d_pi(p, x, latent_steps=30, lr=0.05)
    assert np.all(opt <= plain + 1e-9)
    assert np.mean(opt) < np.mean(plain)


def test_latent_opt_degenerate_cases(autoencoder):
    p, _, te = autoencoder
    x = te.x[:5]
    np.testing.assert_array_equal(project_latent_opt(p, x, steps=0), project(p, x))
    np.testing.assert_array_equal(project_latent_opt(p, x, steps=10, lr=0.0), project(p, x))
    with pytest.raises(ValueError):
        project_latent_opt(axis_projector(), np.zeros(2))


def test_distance_distribution():
    p = axis_projector()
    x = np.random.default_rng(0).standard_normal((20, 2))
    s = distance_distribution(p, x)
    np.testing.assert_allclose(s.values, np.abs(x[:, 1]))
    assert s.mean == pytest.approx(np.abs(x[:, 1]).mean())
    assert s.hist_counts.sum() == 20
    with pytest.raises(AllAttacksFailedError):
        distance_distribution(p, np.zeros((0, 2)))


@settings(max_examples=30)
@given(st.permutations(list(range(12))))
def test_distance_distribution_permutation_invariant(perm):
    p = axis_projector()
    x = np.random.default_rng(1).standard_normal((12, 2))
    a, b = distance_distribution(p, x), distance_distribution(p, x[perm])
    assert a.mean == pytest.approx(b.mean, abs=1e-15) and a.median == b.median
    np.testing.assert_array_equal(a.hist_counts, b.hist_counts)


def test_projector_round_trip(tmp_path, autoencoder):
    pca = fit_pca(load_digits_dataset())
    save_projector(pca, tmp_path / "pca.npz")
    back = load_projector(tmp_path / "pca.npz")
    np.testing.assert_array_equal(back.components, pca.components)
    np.testing.assert_array_equal(back.mean, pca.mean)
    ae = autoencoder[0]
    save_projector(ae, tmp_path / "ae.npz")
    back = load_projector(tmp_path / "ae.npz")
    for a, b in zip(ae.encoder.params + ae.decoder.params, back.encoder.params + back.decoder.params):
        np.testing.assert_array_equal(a.data, b.data)
    x = autoencoder[2].x[:3]
    np.testing.assert_array_equal(project(back, x), project(ae, x))
