"""Acceptance criteria 1 to 11, each at its stated tolerance.

Every test records one PASS/FAIL line, printed again in the terminal summary.
Seeds are fixed in advance and never tuned.
"""

import math
import warnings

import numpy as np
import pytest

from fracspde.estimators import mle, mle_white
from fracspde.experiments import (
    ExperimentConfig,
    _simulate_modes,
    identity_refinement,
    run_consistency,
    run_normality,
    run_oracle_check,
    white_collapse,
)
from fracspde.laplace import bessel_i_scaled, lemma_limit_check, psi
from fracspde.pipeline import simulate_mode_batch
from fracspde.spectral_model import classify_consistency, heat_periodic, laplacian_plus_theta

SEED = 12345
H_GRID = (0.5, 0.6, 0.75, 0.9)
NORMALITY_MODEL = {"preset": "laplacian_plus_theta", "params": {"d": 2, "c": 10.0}}

pytestmark = pytest.mark.slow


def test_criterion_01_white_collapse(verdict):
    cfg = ExperimentConfig(kind="estimate", seed=SEED, H=0.5, N=10, n=1024, workers=1)
    model = cfg.spectral_model()
    data = _simulate_modes(cfg)
    modes = [(u, tr) for u, tr, _ in data]
    a = mle(modes, model).theta_hat
    b = mle_white([u for u, _, _ in data], model).theta_hat
    rel = abs(a - b) / abs(b)
    study = white_collapse(5.0, steps=(256, 512, 1024), seed=SEED)
    # the estimators use the representation of Q; the quotient route is reported only
    used = {k: study.errors[k] for k in ("Q_representation", "Z", "M")}
    transforms_ok = all(max(v) <= 1e-12 or study.orders[k] >= 0.5 for k, v in used.items())
    detail = (f"mle vs mle_white rel diff {rel:.1e}; max errors "
              + ", ".join(f"{k} {max(v):.1e}" for k, v in used.items())
              + f"; quotient Q order {study.orders['Q_quotient']:.2f}")
    assert verdict(1, rel < 1e-10 and transforms_ok, detail)


def test_criterion_02_mean_limit(verdict):
    errs = {H: lemma_limit_check("A1", H, 1.0, [1000.0]).final_relative_error for H in H_GRID}
    ok = all(e < 0.02 for e in errs.values())
    assert verdict(2, ok, "relative errors " + ", ".join(f"H={H}: {e:.2%}" for H, e in errs.items()))


def test_criterion_03_variance_limit(verdict):
    errs = {H: lemma_limit_check("A2", H, 1.0, [1000.0]).final_relative_error for H in H_GRID}
    ok = all(e < 0.05 for e in errs.values())
    assert verdict(3, ok, "relative errors " + ", ".join(f"H={H}: {e:.2%}" for H, e in errs.items()))


def test_criterion_04_bessel_asymptotic(verdict):
    x = 100.0
    dev = {p: abs(math.sqrt(2 * math.pi * x) * bessel_i_scaled(p, x) - 1.0)
           for p in (-0.9, 0.9, -0.5, 0.5, -0.25, 0.25, 0.1)}
    ok = all(d <= 1e-3 for d in dev.values())
    detail = "deviations " + ", ".join(f"p={p}: {d:.1e}" for p, d in dev.items())
    assert verdict(4, ok, detail)


@pytest.fixture(scope="module")
def oracle():
    cfg = ExperimentConfig(kind="oracle-check", seed=SEED, H=0.75, mu=10.0, T=1.0, M=1000, a=1.0, workers=1)
    return run_oracle_check(cfg)


def test_criterion_05_energy_oracle(oracle, verdict):
    r1, r2 = oracle.row("mean_energy"), oracle.row("isometry_mean_C2")
    ok = abs(r1["z"]) <= 3 and abs(r2["z"]) <= 3
    assert verdict(5, ok, f"z(mean energy) {r1['z']:+.2f}, z(isometry) {r2['z']:+.2f}, oracle {r1['oracle']:.6f}")


def test_criterion_06_stationary_variance(verdict):
    H, mu, M = 0.75, 50.0, 10_000
    s = simulate_mode_batch(H, mu, 1.0, 1024, 4, SEED, 1, range(M))
    scaled = mu ** (2 * H) * np.var(s["uT"], ddof=1)
    target = H * (2 * H - 1) * math.gamma(2 * H - 1)
    rel = abs(scaled / target - 1)
    assert verdict(6, rel < 0.05, f"mu^2H Var u(T) = {scaled:.4f} vs {target:.4f} ({rel:.2%})")


def test_criterion_07_consistency(verdict):
    heat = run_consistency(ExperimentConfig(kind="consistency", seed=SEED, H=0.6, M=100, eps=0.5, workers=1))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        counter = run_consistency(ExperimentConfig(
            kind="consistency", seed=SEED, H=0.6, M=100, eps=0.5, theta_true=0.0, workers=1,
            model={"preset": "laplacian_plus_theta", "params": {"d": 1, "c": 1.0}}))
    e = [r["median_abs_error"] for r in heat.rows]
    ok = (heat.regime == "divergent" and e[-1] < e[0] and heat.flag is None
          and counter.regime == "convergent" and counter.flag == "inconsistent regime" and counter.passed)
    detail = (f"heat median |err| N=5 {e[0]:.4f} -> N=50 {e[-1]:.4f}; "
              f"counterexample ratio {counter.ratio:.2f} flagged {counter.flag!r}")
    assert verdict(7, ok, detail)


@pytest.mark.parametrize("H", [0.6, 0.5])
def test_criterion_08_normality(H, verdict):
    res = run_normality(ExperimentConfig(kind="normality", seed=SEED, H=H, T=2.0, N=50, M=200, eps=0.25,
                                         model=NORMALITY_MODEL, workers=1))
    s = res.summary
    assert verdict(8, res.passed, f"H={H}: mean {s.mean:+.3f}, variance {s.variance:.3f}, KS p {s.ks_pvalue:.3f}")


def test_criterion_09_identity(verdict):
    rng = np.random.default_rng(SEED)
    Hs = rng.permutation(np.repeat(H_GRID, 5))
    orders = []
    for k, H in enumerate(Hs):
        mu, T = rng.uniform(1, 20), rng.uniform(0.5, 2)
        st = identity_refinement(float(H), mu, T, steps=(256, 512, 1024), seed=SEED, mode=k + 1)
        orders.append((float(H), st.orders["identity"], st.passed()))
    ok = all(p for _, _, p in orders)
    worst = min(orders, key=lambda t: t[1])
    assert verdict(9, ok, f"20 configurations, lowest order {worst[1]:.2f} at H={worst[0]}")


def test_criterion_10_classifier(verdict):
    got = (classify_consistency(heat_periodic()), classify_consistency(laplacian_plus_theta(d=1)),
           classify_consistency(laplacian_plus_theta(d=2)))
    assert verdict(10, got == ("divergent", "convergent", "divergent"), f"heat, d=1, d=2 -> {got}")


def test_criterion_11_laplace_sanity(oracle, verdict):
    a_grid = np.concatenate([[0.0], np.logspace(-3, 3, 40)])
    worst, monotone = 0.0, True
    for H in H_GRID:
        for mu in (1.0, 10.0, 100.0):
            vals = [psi(a, mu, H, 1.0).psi for a in a_grid]
            worst = max(worst, abs(vals[0] - 1.0))
            monotone &= all(v1 < v0 for v0, v1 in zip(vals, vals[1:]))
    z = oracle.row("laplace_transform")["z"]
    ok = worst <= 1e-12 and monotone and abs(z) <= 3
    assert verdict(11, ok, f"|Psi(0) - 1| max {worst:.1e}, decreasing {monotone}, z(exp(-B)) {z:+.2f}")
