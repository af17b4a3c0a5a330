"""Parametric bootstrap standard errors."""

import numpy as np
import pytest

from tsnkit import (
    EstimationFailedError,
    GridSpec,
    InvalidParameterError,
    Method,
    RngStream,
    SnParams,
    TsnModel,
    fit,
    sample_tsn,
    truncation_bounds,
)
from tsnkit.bootstrap import BootstrapSummary, parametric_bootstrap

GRID = GridSpec(5, 41)


@pytest.fixture(scope="module")
def fitted():
    p = SnParams(0, 1, 2)
    w = truncation_bounds("right", 0.1, p)
    x = sample_tsn(TsnModel(p, w), 300, RngStream(1))
    return fit(Method.GRID_MOM, x, w, grid=GRID), w


def test_summary_fields(fitted):
    res, w = fitted
    summ = parametric_bootstrap(res, w, 300, B=8, rng=RngStream(4))
    assert isinstance(summ, BootstrapSummary)
    assert summ.replicates.shape == (8 - summ.failures, 3)
    assert np.all(summ.se >= 0)
    np.testing.assert_allclose(summ.se, summ.replicates.std(axis=0, ddof=1))
    d = summ.as_dict()
    assert d["B"] == 8 and set(d["se"]) == {"xi", "omega", "alpha"}


def test_deterministic(fitted):
    res, w = fitted
    a = parametric_bootstrap(res, w, 300, B=6, rng=RngStream(4))
    b = parametric_bootstrap(res, w, 300, B=6, rng=RngStream(4))
    assert np.array_equal(a.replicates, b.replicates)


def test_seed_changes_replicates(fitted):
    res, w = fitted
    a = parametric_bootstrap(res, w, 300, B=6, rng=RngStream(4))
    b = parametric_bootstrap(res, w, 300, B=6, rng=RngStream(5))
    assert not np.array_equal(a.replicates, b.replicates)


def test_prefix_stability(fitted):
    # replicate b depends only on b, so a larger B extends the same sequence
    res, w = fitted
    a = parametric_bootstrap(res, w, 300, B=4, rng=RngStream(4))
    b = parametric_bootstrap(res, w, 300, B=7, rng=RngStream(4))
    assert np.array_equal(a.replicates, b.replicates[:4])


def test_worker_count_invariance(fitted):
    res, w = fitted
    a = parametric_bootstrap(res, w, 300, B=6, rng=RngStream(2), workers=1)
    b = parametric_bootstrap(res, w, 300, B=6, rng=RngStream(2), workers=2)
    assert np.array_equal(a.replicates, b.replicates)


def test_se_shrinks_with_n(fitted):
    res, w = fitted
    small = parametric_bootstrap(res, w, 500, B=10, rng=RngStream(3))
    large = parametric_bootstrap(res, w, 100_000, B=10, rng=RngStream(3))
    assert np.all(large.se < small.se)


def test_other_method(fitted):
    res, w = fitted
    summ = parametric_bootstrap(res, w, 200, B=4, method="mle", rng=RngStream(8))
    assert summ.B == 4 and np.all(np.isfinite(summ.se))


@pytest.mark.parametrize("B, n", [(1, 100), (10, 1)])
def test_argument_errors(fitted, B, n):
    res, w = fitted
    with pytest.raises(InvalidParameterError):
        parametric_bootstrap(res, w, n, B=B)


def test_requires_converged_fit(fitted):
    res, w = fitted
    bad = type(res)(res.method, res.estimate, res.loglik, converged=False)
    with pytest.raises(InvalidParameterError):
        parametric_bootstrap(bad, w, 100, B=4)


def test_all_replicates_failing(fitted, monkeypatch):
    import tsnkit.bootstrap as bs

    res, w = fitted
    monkeypatch.setattr(bs, "fit", lambda *a, **k: (_ for _ in ()).throw(EstimationFailedError("x")))
    with pytest.raises(EstimationFailedError):
        parametric_bootstrap(res, w, 50, B=3)


@pytest.mark.slow
def test_calibration_against_reference_spread():
    # a reference IQR of xi_hat, 1.027, implies a sampling sd near 1.027 / 1.349
    truth = SnParams(0, 1, 1)
    w = truncation_bounds("right", 0.1, truth)
    x = sample_tsn(TsnModel(truth, w), 500, RngStream(60))
    res = fit(Method.GRID_MOM, x, w)
    summ = parametric_bootstrap(res, w, 500, B=200, rng=RngStream(61))
    sd_proxy = 1.027 / 1.349
    assert sd_proxy / 2 <= summ.se[0] <= 2 * sd_proxy
