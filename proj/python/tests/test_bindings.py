import json
import math

import numpy as np
import pytest
from scipy import integrate, stats

import firecast as fc


def test_egp_cdf_matches_integrated_pdf():
    sigma, xi, kappa = 2.0, 0.2, 1.5
    for y in (0.3, 1.0, 4.0, 20.0):
        area, _ = integrate.quad(lambda t: fc.egp_pdf(t, sigma, xi, kappa), 0.0, y)
        assert fc.egp_cdf(y, sigma, xi, kappa) == pytest.approx(area, rel=1e-8)


def test_egp_kappa_one_is_gpd():
    y = np.linspace(0.1, 30.0, 50)
    got = fc.egp_cdf(y, 3.0, 0.25, 1.0)
    np.testing.assert_allclose(got, stats.genpareto.cdf(y, 0.25, scale=3.0), rtol=1e-12)


def test_egp_quantile_inverts_cdf_and_median_link():
    u = np.array([0.01, 0.25, 0.5, 0.9, 0.999])
    q = fc.egp_quantile(u, 1.3, -0.1, 0.7)
    np.testing.assert_allclose(fc.egp_cdf(q, 1.3, -0.1, 0.7), u, rtol=1e-10)
    sigma = fc.egp_sigma_from_eta(0.8, 0.2, 1.2)
    assert fc.egp_quantile(0.5, sigma, 0.2, 1.2) == pytest.approx(math.exp(0.8), rel=1e-10)


def test_egp_sample_is_reproducible():
    a = fc.egp_sample(500, 1.0, 0.1, 1.2, 4)
    assert a == fc.egp_sample(500, 1.0, 0.1, 1.2, 4)
    assert stats.kstest(a, lambda y: fc.egp_cdf(y, 1.0, 0.1, 1.2)).pvalue > 0.001


def test_trunc_poisson_against_scipy():
    lam = 2.3
    for y in range(1, 10):
        expected = stats.poisson.pmf(y, lam) / (1.0 - math.exp(-lam))
        assert fc.trunc_poisson_pmf(y, lam) == pytest.approx(expected, rel=1e-12)
    with pytest.raises(ValueError):
        fc.trunc_poisson_pmf(0, lam)


def test_scoring_against_direct_formulas():
    labels = [0, 0, 1, 1, 0, 1]
    scores = [0.1, 0.4, 0.35, 0.8, 0.2, 0.9]
    pos = [s for s, l in zip(scores, labels) if l]
    neg = [s for s, l in zip(scores, labels) if not l]
    direct = np.mean([1.0 if p > n else 0.5 if p == n else 0.0 for p in pos for n in neg])
    assert fc.auc(labels, scores) == pytest.approx(direct)
    x = np.random.default_rng(1).gamma(2.0, size=40)
    y = 1.7
    pair = np.abs(x[:, None] - x[None, :]).sum()
    fair = np.mean(np.abs(x - y)) - pair / (2 * len(x) * (len(x) - 1))
    assert fc.crps_from_samples(list(x), y) == pytest.approx(fair, rel=1e-12)
    assert fc.crps_from_samples(list(x), y, fair=False) == pytest.approx(
        np.mean(np.abs(x - y)) - pair / (2 * len(x) ** 2), rel=1e-12
    )


def test_boosting_roundtrip_and_shap_additivity():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(300, 3))
    y = rng.poisson(np.exp(0.5 + 0.8 * x[:, 0]))
    model = fc.train(x, y.astype(float), fc.BoostConfig(n_trees=40, max_depth=3), 7, ["a", "b", "c"])
    assert np.all(model.predict(x) > 0)
    assert np.corrcoef(model.predict_raw(x), 0.8 * x[:, 0])[0, 1] > 0.9
    back = fc.TreeEnsemble.from_json(model.to_json())
    np.testing.assert_array_equal(back.predict(x), model.predict(x))
    phi, base = model.shap_values(list(x[5]))
    assert base + sum(phi) == pytest.approx(model.predict_raw(x[5:6])[0], abs=1e-10)
    ranking = model.mean_abs_shap(x)
    assert int(np.argmax(ranking)) == 0
    with pytest.raises(ValueError):
        fc.BoostConfig(learning_rate=-1.0)


def test_simulate_writes_valid_config(tmp_path):
    cfg = fc.simulate(tmp_path / "data", 3, rows=4, cols=4, district_rows=2, district_cols=2)
    text = json.loads(fc.validate_config(cfg))
    assert text["seed"] == 3
    assert (tmp_path / "data" / "events.csv").stat().st_size > 0
    with pytest.raises(ValueError):
        fc.simulate(tmp_path / "bad", 3, rows=4, cols=4, district_rows=3, district_cols=3)


def test_config_errors(tmp_path):
    cfg = fc.simulate(tmp_path / "data", 3, rows=4, cols=4, district_rows=2, district_cols=2)
    doc = json.loads(cfg.read_text())
    del doc["seed"]
    cfg.write_text(json.dumps(doc))
    with pytest.raises(fc.ConfigError):
        fc.validate_config(cfg)
    with pytest.raises(fc.IoError):
        fc.validate_config(tmp_path / "missing.json")


def test_sha256():
    assert fc.sha256_hex(b"abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
