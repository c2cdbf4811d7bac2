import math

import numpy as np
import pytest

import jsaphase as jp


def test_default_jsa_is_normalised_and_factorable():
    jsa = jp.build_jsa()
    a = jsa.amplitude
    assert a.shape == (128, 128)
    ds = jsa.signal_axis[1] - jsa.signal_axis[0]
    di = jsa.idler_axis[1] - jsa.idler_axis[0]
    assert np.sum(np.abs(a) ** 2) * ds * di == pytest.approx(1.0, abs=1e-12)
    assert jp.purity(jsa) == pytest.approx(1.0, abs=1e-6)


def test_chirped_gaussian_purity():
    jsa = jp.chirped_factorable_jsa(1.0, 1.0, 1.0, span=24.0, n_points=128)
    assert jp.purity(jsa) == pytest.approx(1 / math.sqrt(2), abs=1e-6)
    est = jp.analytic_purity_estimates(jsa)
    for v in est.values():
        assert v == pytest.approx(1 / math.sqrt(2), abs=1e-3)


def test_fringe_identity_at_a_grid_point():
    jsa = jp.chirped_factorable_jsa(1.0, 1.2, 0.7, span=16.0, n_points=64)
    s, i = jsa.signal_axis, jsa.idler_axis
    q = (s[20], i[30], s[41], i[25])
    assert jp.four_photon_probability(jsa, *q) == pytest.approx(jp.fringe_closed_form(jsa, 0.7, *q), rel=1e-9)


def test_config_roundtrip_and_rejection():
    cfg = jp.default_config()
    assert jp.normalize_config(cfg) == cfg
    with pytest.raises(jp.ConfigError, match="source.bogus"):
        jp.normalize_config({"source": {"bogus": 1}})


def test_sampling_is_seeded_and_mle_recovers_beta():
    cfg = {"grid": {"n_points": 64}}
    jsa = jp.build_jsa(cfg, 20.0)
    a = jp.sample_fourfold_events(jsa, 2000, seed=4, threads=1)
    b = jp.sample_fourfold_events(jsa, 2000, seed=4, threads=2)
    assert a.shape == (2000, 4)
    assert np.array_equal(a, b)
    fits = jp.fit_beta(a, 20.0, cfg, threads=1)
    beta = abs(fits["beta_true"])
    assert fits["mle"]["value"] == pytest.approx(beta, rel=0.05)
    assert fits["mle"]["method"] == "mle"


def test_too_few_events_raise():
    jsa = jp.build_jsa({"grid": {"n_points": 32}}, 20.0)
    with pytest.raises(jp.InsufficientDataError):
        jp.fit_beta_mle(np.zeros((5, 4)), jsa)


def test_difference_projection_shape():
    jsa = jp.build_jsa({"grid": {"n_points": 32}}, 5.0)
    d = jp.project_fourfold(jsa, "difference", threads=1)
    assert d["values"].ndim == 2
    assert d["values"].sum() == pytest.approx(1.0, rel=1e-9)


def test_purity_point_runs():
    p = jp.purity_point(0.0, seed=3, config={"run": {"n_pulses": 50000}}, threads=1)
    assert p["oracle"] == pytest.approx(1.0, abs=1e-6)
    assert p["count_ratio"] is not None
