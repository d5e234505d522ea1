import math

import numpy as np
import pytest

import coopuplink as cu

GAMMA_BAR = 10 ** -1.5


def cluster(nu_db=6.0, n=20):
    return cu.ClusterConfig(
        mean_snr=GAMMA_BAR,
        rice_factor=10 ** (nu_db / 10),
        active_devices=n,
        power_scaling=cu.PowerScaling.ConstantTotal,
    )


def test_special_functions():
    assert cu.marcum_q(1, 0.0, 2.0) == pytest.approx(math.exp(-2.0), rel=1e-13)
    assert cu.marcum_q(1, 3.0, 0.0) == 1.0
    assert cu.marcum_cdf(2, 1.0, 1.5) == pytest.approx(1 - cu.marcum_q(2, 1.0, 1.5), abs=1e-15)
    assert cu.sinc_norm(0.5) == pytest.approx(2 / math.pi, rel=1e-15)
    assert cu.bessel_i(0, 1.0) == pytest.approx(1.2660658777520084, rel=1e-14)


def test_ckm_cdf_against_samples():
    cfg = cluster(3.0)
    side = cu.CkmSideInfo(sigma_eps=math.radians(10))
    s = cu.simulate("ckm", cfg, 100_000, seed=3, sigma_eps=math.radians(10))
    assert s.shape == (100_000,)
    assert np.all(np.diff(s) >= 0)
    q = s[10_000]
    assert cu.ckm_snr_cdf(cfg, side, q) == pytest.approx(0.1, abs=0.01)
    assert cu.ckm_quantile(cfg, side, 0.1) == pytest.approx(q, rel=0.05)


def test_feedback_degenerate_and_moments():
    cfg = cluster(6.0)
    fb = cu.FeedbackSideInfo(bits=2, word_error_prob=1.0)
    for g in (1e-3, 1e-2, 1e-1):
        assert cu.feedback_snr_cdf(cfg, fb, g) == pytest.approx(-math.expm1(-g / GAMMA_BAR), abs=1e-12)
    m = cu.feedback_moments(cfg, cu.FeedbackSideInfo(bits=2, word_error_prob=0.05), 20)
    assert m["mu_r"] == 0.0
    assert m["sigma_r"] == pytest.approx(m["sigma_i"], rel=1e-12)


def test_required_devices_and_errors():
    n = cu.required_devices(1e-4, 1.0, 2.0, GAMMA_BAR, math.radians(20), cu.PowerScaling.ConstantTotal)
    assert n > 1
    with pytest.raises(ValueError):
        cu.required_devices(1e-4, 1.0, 0.0, GAMMA_BAR, 0.1, cu.PowerScaling.ConstantTotal)
    with pytest.raises(ValueError):
        cu.simulate("beamforming", cfg := cluster(), 10)
    assert cfg.active_devices == 20


def test_figure_analytic_only(tmp_path):
    assert "fig5" in cu.figure_ids()
    assert "metric = dor" in cu.figure_config_text("fig5")
    csv, svg, meta = cu.run_figure("fig5", str(tmp_path), analytic_only=True)
    lines = open(csv).read().splitlines()
    assert lines[0].startswith("delay_threshold_s,")
    assert len(lines) == 42
    assert open(svg).read().startswith("<svg")
