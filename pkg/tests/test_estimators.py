"""Sample-based estimator tests: batch containers, the conditional-density
dependence estimator, critic-based lower bounds, the spectral divergence,
and the kernel two-sample statistic.  Training configs here are small;
statistical calibration at full defaults lives in the acceptance module."""

import math

import numpy as np
import pytest

from infoshift.errors import ConfigError, DomainError, ShapeError
from infoshift.estimators import (
    EstimatorConfig,
    SampleBatch,
    club_estimate,
    club_train,
    emi_estimate,
    infonce_estimate,
    loglik_slope,
    mine_estimate,
    mmd,
    nwj_estimate,
    read_features,
    rjsd,
    write_features,
)
from infoshift.numkit import Rng
from infoshift.synthgen import GaussianWorld, sample_gaussian_pairs

LN2 = math.log(2.0)

CHEAP = EstimatorConfig(hidden=32, lr=0.003, batch=256, iterations=300, seed=0)


def _gauss_batch(rho: float, n: int, seed: int, d: int = 1) -> SampleBatch:
    world = GaussianWorld(rho_ref=0.0, rho_model=rho, d=d)
    return sample_gaussian_pairs(world, n, Rng(seed), role="model")


# -- sample batches ---------------------------------------------------------------

def test_sample_batch_properties_and_views():
    b = SampleBatch(x=np.zeros((10, 3)), y=np.ones((10, 2)))
    assert (b.n, b.d_x, b.d_y) == (10, 3, 2)
    taken = b.take(np.array([1, 3, 5]))
    assert taken.n == 3 and taken.d_x == 3
    perm = np.array([1, 0] + list(range(2, 10)))
    shuf = b.shuffled_y(perm)
    assert np.array_equal(shuf.x, b.x)
    assert np.array_equal(shuf.y, b.y[perm])


def test_sample_batch_validation():
    with pytest.raises(ShapeError):
        SampleBatch(x=np.zeros(5), y=np.zeros((5, 1)))
    with pytest.raises(ShapeError):
        SampleBatch(x=np.zeros((5, 1)), y=np.zeros((4, 1)))
    with pytest.raises(DomainError):
        SampleBatch(x=np.full((3, 1), np.nan), y=np.zeros((3, 1)))


def test_feature_file_round_trip_is_bitwise():
    rng = Rng(1)
    b = SampleBatch(x=rng.normal(size=(37, 3)), y=rng.normal(size=(37, 2)))
    path = "/tmp/infoshift-test-features.tsv"
    write_features(path, b)
    back = read_features(path)
    assert np.array_equal(back.x, b.x)
    assert np.array_equal(back.y, b.y)


def test_feature_file_rejects_malformed_input(tmp_path):
    bad_header = tmp_path / "bad-header.tsv"
    bad_header.write_text("#not-the-format\n0\t1.0\t1.0\n")
    with pytest.raises(DomainError):
        read_features(bad_header)
    bad_row = tmp_path / "bad-row.tsv"
    bad_row.write_text("#emi-features v1 d_x=2 d_y=1\n0\t1.0,2.0\tnot-a-float\n")
    with pytest.raises(DomainError):
        read_features(bad_row)


def test_estimator_config_validation():
    with pytest.raises(ConfigError):
        EstimatorConfig(hidden=0)
    with pytest.raises(ConfigError):
        EstimatorConfig(lr=0.0)
    with pytest.raises(ConfigError):
        EstimatorConfig(iterations=-1)
    with pytest.raises(ConfigError):
        EstimatorConfig(batch=0)
    assert EstimatorConfig(iterations=0).iterations == 0


# -- conditional-density estimator ---------------------------------------------------

def test_club_train_is_deterministic():
    src = lambda rng_seed=[0]: _gauss_batch(0.8, 256, 7)
    cfg = EstimatorConfig(hidden=16, lr=0.003, batch=256, iterations=50, seed=3)
    a = club_train(lambda: _gauss_batch(0.8, 256, 7), cfg)
    b = club_train(lambda: _gauss_batch(0.8, 256, 7), cfg)
    for k in a.mean_net.params:
        assert np.array_equal(a.mean_net.params[k], b.mean_net.params[k])
        assert np.array_equal(a.logvar_net.params[k], b.logvar_net.params[k])
    assert np.array_equal(a.loglik_trace, b.loglik_trace)
    assert a.loglik_trace.shape == (50,)


def test_club_train_zero_iterations_returns_untouched_init():
    cfg = EstimatorConfig(hidden=16, iterations=0, seed=9)
    est = club_train(lambda: _gauss_batch(0.5, 64, 1), cfg)
    from infoshift.numkit import Mlp2

    fresh_mean = Mlp2(1, 16, 1, Rng(9).child("mean"))
    for k in fresh_mean.params:
        assert np.array_equal(est.mean_net.params[k], fresh_mean.params[k])
    assert est.loglik_trace.size == 0


def test_club_estimate_matches_all_pairs_oracle():
    """The moment shortcut for the cross term must equal the explicit
    n x n enumeration."""
    est = club_train(lambda: _gauss_batch(0.7, 128, 11), CHEAP)
    batch = _gauss_batch(0.7, 50, 12)
    fast = club_estimate(est, batch)
    aligned = float(np.mean(est.log_density(batch.x, batch.y)))
    cross = np.mean(
        [
            float(np.mean(est.log_density(batch.x, np.repeat(batch.y[j : j + 1], 50, axis=0))))
            for j in range(50)
        ]
    )
    assert fast == pytest.approx(aligned - cross, abs=1e-10)


def test_club_separates_dependence_from_independence():
    """Small-config sanity: the matched population scores clearly above an
    independent one.  Tight calibration belongs to the acceptance gate."""
    est = club_train(lambda: _gauss_batch(0.9, 512, 13), CHEAP)
    dep = club_estimate(est, _gauss_batch(0.9, 4096, 14))
    indep = club_estimate(est, _gauss_batch(0.0, 4096, 15))
    assert dep > indep + 0.2
    assert abs(indep) < 0.3


def test_club_estimate_rejects_dim_mismatch():
    est = club_train(lambda: _gauss_batch(0.5, 64, 16), EstimatorConfig(hidden=8, iterations=5))
    with pytest.raises(ShapeError):
        club_estimate(est, _gauss_batch(0.5, 64, 17, d=2))


def test_club_logvar_clamp():
    est = club_train(lambda: _gauss_batch(0.5, 64, 18), EstimatorConfig(hidden=8, iterations=5))
    _, logvar = est.conditional_params(Rng(19).normal(size=(100, 1)) * 50.0)
    assert logvar.min() >= -10.0 and logvar.max() <= 10.0


def test_emi_estimate_antisymmetric_and_zero_on_self():
    est = club_train(lambda: _gauss_batch(0.6, 256, 20), CHEAP)
    a = _gauss_batch(0.6, 512, 21)
    b = _gauss_batch(0.1, 512, 22)
    assert emi_estimate(a, b, est) == -emi_estimate(b, a, est)
    assert emi_estimate(a, a, est) == 0.0


def test_loglik_slope_shapes_and_flat_series():
    slope, stderr = loglik_slope(np.ones(200))
    assert slope == pytest.approx(0.0, abs=1e-12)
    assert stderr == pytest.approx(0.0, abs=1e-12)
    rising = np.linspace(0.0, 1.0, 400)
    slope, stderr = loglik_slope(rising)
    assert slope > 0.0
    with pytest.raises(DomainError):
        loglik_slope(np.ones(3), tail_frac=0.0)


# -- critic estimators ----------------------------------------------------------------

CRITIC_CFG = EstimatorConfig(hidden=32, lr=0.003, batch=128, iterations=250, seed=0)


def test_infonce_detects_strong_dependence():
    val = infonce_estimate(lambda: _gauss_batch(0.95, 128, 23), CRITIC_CFG)
    assert val > 0.5


def test_infonce_capped_by_log_batch():
    val = infonce_estimate(lambda: _gauss_batch(0.999, 128, 24), CRITIC_CFG)
    assert val <= math.log(128) + 1e-9


def test_critics_near_zero_under_independence():
    src = lambda: _gauss_batch(0.0, 128, 25)
    for fn in (mine_estimate, nwj_estimate, infonce_estimate):
        val = fn(src, CRITIC_CFG)
        assert abs(val) < 0.25, f"{fn.__name__}: {val}"


def test_critics_are_deterministic():
    src = lambda: _gauss_batch(0.7, 128, 26)
    cfg = EstimatorConfig(hidden=16, lr=0.003, batch=64, iterations=40, seed=5)
    assert mine_estimate(src, cfg) == mine_estimate(src, cfg)
    assert nwj_estimate(src, cfg) == nwj_estimate(src, cfg)


def test_critics_order_dependence_levels():
    """A stronger coupling should produce a larger lower-bound estimate."""
    cfg = EstimatorConfig(hidden=32, lr=0.003, batch=128, iterations=200, seed=1)
    lo = infonce_estimate(lambda: _gauss_batch(0.2, 128, 27), cfg)
    hi = infonce_estimate(lambda: _gauss_batch(0.95, 128, 27), cfg)
    assert hi > lo


# -- spectral divergence ---------------------------------------------------------------

def test_rjsd_identical_sets_score_zero_exactly():
    a = Rng(30).normal(size=(40, 8))
    assert rjsd(a, a.copy()) == 0.0


def test_rjsd_orthogonal_embeddings_score_ln2_exactly():
    a = np.zeros((20, 4))
    b = np.zeros((20, 4))
    a[:, 0] = 1.0
    b[:, 1] = 1.0
    assert rjsd(a, b) == pytest.approx(LN2, abs=1e-12)


def test_rjsd_is_symmetric_bitwise():
    a = Rng(31).normal(size=(30, 6))
    b = Rng(32).normal(size=(25, 6))
    assert rjsd(a, b) == rjsd(b, a)


def test_rjsd_range():
    for seed in range(10):
        a = Rng(seed).normal(size=(20, 5))
        b = Rng(100 + seed).normal(size=(20, 5))
        v = rjsd(a, b)
        assert -1e-12 <= v <= LN2 + 1e-12


def test_rjsd_rank_one_set_has_zero_entropy():
    """All rows on one ray: the spectrum is a single atom, so mixing two
    copies of the same ray still gives zero."""
    a = np.tile([[3.0, 4.0]], (15, 1))
    b = np.tile([[1.5, 2.0]], (10, 1))
    assert rjsd(a, b) == pytest.approx(0.0, abs=1e-12)


def test_rjsd_rejects_zero_rows_and_dim_mismatch():
    a = np.zeros((5, 3))
    b = Rng(33).normal(size=(5, 3))
    with pytest.raises(DomainError, match="row 0"):
        rjsd(a, b)
    with pytest.raises(ShapeError):
        rjsd(Rng(34).normal(size=(5, 3)), Rng(35).normal(size=(5, 4)))


# -- kernel two-sample statistic ----------------------------------------------------------

def test_mmd_identical_samples_not_positive():
    a = Rng(36).normal(size=(60, 4))
    assert mmd(a, a.copy()) <= 1e-12


def test_mmd_far_clusters_approach_two():
    """With within-cluster spread ~0 and huge separation, the unbiased
    statistic approaches k(0) + k(0) - 2 k(far) = 2."""
    a = np.zeros((40, 2)) + 1e-9 * Rng(37).normal(size=(40, 2))
    b = a + 1000.0
    assert mmd(a, b, bandwidth=1.0) == pytest.approx(2.0, abs=1e-6)


def test_mmd_fixed_bandwidth_matches_direct_formula():
    rng = Rng(38)
    a = rng.normal(size=(15, 3))
    b = rng.normal(size=(12, 3)) + 0.5
    s = 0.7
    kaa = np.exp(-((a[:, None] - a[None]) ** 2).sum(-1) / (2 * s * s))
    kbb = np.exp(-((b[:, None] - b[None]) ** 2).sum(-1) / (2 * s * s))
    kab = np.exp(-((a[:, None] - b[None]) ** 2).sum(-1) / (2 * s * s))
    expected = (
        (kaa.sum() - np.trace(kaa)) / (15 * 14)
        + (kbb.sum() - np.trace(kbb)) / (12 * 11)
        - 2 * kab.mean()
    )
    assert mmd(a, b, bandwidth=s) == pytest.approx(expected, abs=1e-12)


def test_mmd_separates_shifted_distributions():
    a = Rng(39).normal(size=(200, 2))
    b = Rng(40).normal(size=(200, 2)) + 2.0
    near = Rng(41).normal(size=(200, 2))
    assert mmd(a, b) > 10 * abs(mmd(a, near))


def test_mmd_validation():
    with pytest.raises(ShapeError):
        mmd(np.zeros((1, 2)), np.zeros((5, 2)))
    with pytest.raises(DomainError, match="bandwidth"):
        mmd(np.zeros((5, 2)), np.zeros((5, 2)))
    with pytest.raises(DomainError):
        mmd(Rng(42).normal(size=(5, 2)), Rng(43).normal(size=(5, 2)), bandwidth=-1.0)
