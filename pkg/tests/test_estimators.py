import math

import numpy as np
import pytest

from fracspde.estimators import (
    DegenerateDataError,
    EstimateResult,
    ModeStatistics,
    degenerate_exact,
    ergodic_all_modes,
    ergodic_single_mode,
    ergodic_truncation_tail,
    ito_integral,
    log_likelihood,
    longtime_single_mode,
    mle,
    mle_white,
    mode_statistics,
    normalized_error,
)
from fracspde.fbm import FbmPath, TimeGrid, sample_fbm, sample_fbm_batch
from fracspde.fou import ModePath, fou_from_fbm, fou_values, stationary_constant
from fracspde.pipeline import simulate_mode_batch
from fracspde.spectral_model import (
    Constant,
    DomainError,
    Power,
    SpectralModel,
    heat_periodic,
    laplacian_plus_theta,
)
from fracspde.transform import transform_mode

ONE_MODE = SpectralModel(rho=Constant(0.0), nu=Constant(1.0), theta_domain=(-math.inf, math.inf))


def _modes(model, theta, H, n, N, seed=0, rep=0, sim_factor=4):
    out = []
    for j in range(1, N + 1):
        fine = sample_fbm(H, TimeGrid(1.0, n * sim_factor), (seed, j, rep))
        u_fine = fou_from_fbm(float(model.mu(theta, j)), 0.0, fine, j)
        g = TimeGrid(1.0, n)
        u = ModePath(g, j, u_fine.mu, u_fine.values[::sim_factor])
        w = FbmPath(g, H, fine.values[::sim_factor])
        out.append((u, transform_mode(u, H, w)))
    return out


@pytest.mark.parametrize("rule", ["ito", "left"])
def test_white_equivalence(rule):
    model = laplacian_plus_theta(d=2, c=10.0)
    modes = _modes(model, 1.0, 0.5, 1024, 5, seed=3)
    a = mle(modes, model, rule=rule)
    b = mle_white([m for m, _ in modes], model, rule=rule)
    assert a.theta_hat == pytest.approx(b.theta_hat, rel=1e-10)
    assert a.denominator == pytest.approx(b.denominator, rel=1e-10)


def test_zero_path_is_degenerate():
    g = TimeGrid(1.0, 64)
    u = ModePath(g, 1, 1.0, np.zeros(65))
    tr = transform_mode(u, 0.7)
    with pytest.raises(DegenerateDataError):
        mle([(u, tr)], ONE_MODE)
    with pytest.raises(DegenerateDataError):
        longtime_single_mode((u, tr), 0.0, 1.0)


def test_mle_requires_zero_initial_value():
    g = TimeGrid(1.0, 64)
    u = ModePath(g, 1, 1.0, np.ones(65), 1.0)
    with pytest.raises(DomainError):
        mle([(u, transform_mode(u, 0.7))], ONE_MODE)


def test_white_classical_ou_form():
    g = TimeGrid(1.0, 2048)
    u = fou_from_fbm(3.0, 0.0, sample_fbm(0.5, g, 8))
    x = u.values
    classical = -np.sum(x[:-1] * np.diff(x)) / (np.sum(x[:-1] ** 2) * g.dt)
    assert mle_white([u], ONE_MODE, rule="left").theta_hat == pytest.approx(classical, rel=1e-12)


def test_white_rejects_fractional_noise():
    g = TimeGrid(1.0, 16)
    with pytest.raises(DomainError):
        mle_white([ModePath(g, 1, 1.0, np.zeros(17))], ONE_MODE, H=0.7)


def test_white_deterministic_decay():
    # Riemann sums of -int u u' / int u^2 for u = exp(-c t): first order in dt
    c = 2.5
    errs = []
    for n in (256, 1024):
        g = TimeGrid(1.0, n)
        u = ModePath(g, 1, c, np.exp(-c * g.t), 1.0)
        errs.append(abs(mle_white([u], ONE_MODE, rule="left").theta_hat - c))
    assert errs[1] < errs[0] / 3 and errs[1] < 5 * c * c / 1024


@pytest.fixture(scope="module")
def heat_modes():
    model = heat_periodic()
    return model, _modes(model, 1.0, 0.75, 2048, 3, seed=11)


def test_loglik_stationary_at_mle(heat_modes):
    model, modes = heat_modes
    res = mle(modes, model)
    h = 1e-3
    grid = res.theta_hat + h * np.arange(-20, 21)
    ll = [log_likelihood(t, modes, model) for t in grid]
    assert abs(grid[int(np.argmax(ll))] - res.theta_hat) <= h
    # exactly quadratic: derivative vanishes at the estimate
    d = (log_likelihood(res.theta_hat + 1e-4, modes, model) - log_likelihood(res.theta_hat - 1e-4, modes, model)) / 2e-4
    assert abs(d) < 1e-8 * abs(res.denominator) + 1e-9 * abs(log_likelihood(res.theta_hat, modes, model))


def test_loglik_quadratic_coefficient(heat_modes):
    model, modes = heat_modes
    res = mle(modes, model)
    t0, h = 0.8, 0.3
    ll = [log_likelihood(t0 + k * h, modes, model) for k in (-1, 0, 1)]
    second = (ll[0] - 2 * ll[1] + ll[2]) / h**2
    assert second == pytest.approx(-res.denominator, rel=1e-9)


def test_loglik_zero_paths_and_domain():
    g = TimeGrid(1.0, 32)
    u = ModePath(g, 1, 1.0, np.zeros(33))
    modes = [(u, transform_mode(u, 0.6))]
    # the literal sum vanishes; the Ito form keeps its -T/2 bracket term
    assert log_likelihood(0.3, modes, heat_periodic(), rule="left") == 0.0
    assert log_likelihood(0.3, modes, heat_periodic()) == pytest.approx(0.3 * math.pi**2 / 2)
    with pytest.raises(DomainError):
        log_likelihood(-1.0, modes, heat_periodic())


def test_normalized_error_arithmetic():
    r = EstimateResult(1.5, 1, 0.0, 1.0, fisher_I_N=4.0)
    assert normalized_error(r, 1.0) == pytest.approx(1.0)
    assert normalized_error(EstimateResult(2.0, 1, 0.0, 1.0, fisher_I_N=4.0), 2.0) == 0.0
    with pytest.raises(DomainError):
        normalized_error(EstimateResult(2.0, 1, 0.0, 1.0, fisher_I_N=0.0), 1.0)


def test_result_fields(heat_modes):
    model, modes = heat_modes
    res = mle(modes, model, theta_true=1.0)
    assert res.theta_hat == pytest.approx(-res.numerator / res.denominator)
    assert res.fisher_I_N == pytest.approx(math.pi**2 * 14)
    assert res.normalized_error == pytest.approx(math.sqrt(res.fisher_I_N) * (res.theta_hat - 1.0))
    assert '"numerator"' in res.to_json()


def test_longtime_matches_single_mode_mle(heat_modes):
    model, modes = heat_modes
    one = mle(modes[1:2], model).theta_hat
    assert longtime_single_mode(modes[1], float(model.rho(2)), float(model.nu(2))) == pytest.approx(one, rel=1e-14)


def test_longtime_improves_with_horizon():
    H, M = 0.6, 50
    errs = {}
    for T in (5.0, 50.0):
        n = int(64 * T)
        s = simulate_mode_batch(H, 1.0, T, n, 4, 77, 1, range(M))
        est = -s["A"] / s["B"]
        errs[T] = np.median(np.abs(est - 1.0))
    assert errs[50.0] < errs[5.0]


def test_error_decomposition(heat_modes):
    # theta_hat - theta = -sum nu int Q dM / sum nu^2 int Q^2 dw_H up to quadrature error
    model, modes = heat_modes
    res = mle(modes, model)
    stats = [mode_statistics(u, tr) for u, tr in modes]
    num = sum(float(model.nu(s.j)) * s.C for s in stats)
    pred = -num / res.denominator
    assert res.theta_hat - 1.0 == pytest.approx(pred, abs=0.01 + 0.05 * abs(pred))


def test_martingale_numerator_centred():
    model = heat_periodic()
    H, M = 0.75, 200
    total = np.zeros(M)
    for j in (1, 2, 3):
        mu = float(model.mu(1.0, j))
        n = max(1024, 1 << math.ceil(math.log2(mu / 0.5)))
        total += float(model.nu(j)) * simulate_mode_batch(H, mu, 1.0, n, 4, 5, j, range(M))["C"]
    assert abs(total.mean()) <= 3 * total.std(ddof=1) / math.sqrt(M)


def test_ito_rule_is_exact_at_half():
    g = TimeGrid(1.0, 128)
    u = fou_from_fbm(2.0, 0.0, sample_fbm(0.5, g, 1)).values
    assert ito_integral(u, u, 0.5, g.dt) == pytest.approx(0.5 * (u[-1] ** 2 - 1.0))


def test_ito_rule_bias_smaller_than_left():
    # E int Q dZ = -mu E int Q^2 dw_H; the Ito form removes the O(mu dt) bias of the left sum
    H, mu, n, M = 0.75, 200.0, 1024, 400
    ito = simulate_mode_batch(H, mu, 1.0, n, 4, 9, 1, range(M), rule="ito")
    left = simulate_mode_batch(H, mu, 1.0, n, 4, 9, 1, range(M), rule="left")
    eta_ito = np.mean(ito["A"] + mu * ito["B"]) / 0.5
    eta_left = np.mean(left["A"] + mu * left["B"]) / 0.5
    assert abs(eta_ito) < abs(eta_left) / 5


def test_ergodic_single_exact_inversion():
    H, mu, T, n = 0.75, 4.0, 10.0, 100
    level = math.sqrt(stationary_constant(H) / mu ** (2 * H))
    u = ModePath(TimeGrid(T, n), 1, mu, np.full(n + 1, level))
    assert ergodic_single_mode(u, 1.0, 1.5, H) == pytest.approx((mu - 1.0) / 1.5, rel=1e-12)


def test_ergodic_single_brownian_form():
    g = TimeGrid(3.0, 300)
    u = fou_from_fbm(2.0, 0.0, sample_fbm(0.5, g, 2))
    x = u.values**2
    energy = g.dt * (x.sum() - 0.5 * (x[0] + x[-1]))
    assert ergodic_single_mode(u, 0.0, 1.0, 0.5) == pytest.approx(g.T / (2 * energy), rel=1e-12)


def test_ergodic_single_zero_energy():
    with pytest.raises(DomainError):
        ergodic_single_mode(ModePath(TimeGrid(1.0, 8), 1, 1.0, np.zeros(9)), 0.0, 1.0, 0.7)


def test_ergodic_single_long_time():
    H, T, n, M = 0.75, 200.0, 1 << 14, 50
    g = TimeGrid(T, n)
    w = sample_fbm_batch(H, g, 13, 1, range(M))
    u = fou_values(1.0, 0.0, w, g.dt)
    est = [ergodic_single_mode(ModePath(g, 1, 1.0, row), 0.0, 1.0, H) for row in u]
    assert abs(np.median(est) - 1.0) < 0.15


def test_ergodic_all_single_mode_reduces():
    g = TimeGrid(5.0, 500)
    u = fou_from_fbm(1.0, 0.0, sample_fbm(0.7, g, 4))
    assert ergodic_all_modes([u], ONE_MODE, 0.7) == pytest.approx(ergodic_single_mode(u, 0.0, 1.0, 0.7))


def test_ergodic_all_rejects_known_operator():
    g = TimeGrid(1.0, 8)
    u = ModePath(g, 1, 1.0, np.ones(9))
    with pytest.raises(DomainError):
        ergodic_all_modes([u], laplacian_plus_theta(d=1, c=1.0), 0.7)


def test_ergodic_all_heat_like():
    model = SpectralModel(rho=Constant(0.0), nu=Power(math.pi**2, 2.0), theta_domain=(0, math.inf))
    H, T, n, M, N = 0.75, 100.0, 1 << 14, 50, 20
    g = TimeGrid(T, n)
    est = []
    paths = {j: fou_values(float(model.mu(1.0, j)), 0.0, sample_fbm_batch(H, g, 21, j, range(M)), g.dt)
             for j in range(1, N + 1)}
    for r in range(M):
        modes = [ModePath(g, j, float(model.mu(1.0, j)), paths[j][r]) for j in range(1, N + 1)]
        est.append(ergodic_all_modes(modes, model, H))
    assert abs(np.median(est) - 1.0) < 0.15


def test_ergodic_truncation_tail():
    model = SpectralModel(rho=Constant(0.0), nu=Power(1.0, 2.0))
    H, J = 0.75, 50
    j = np.arange(J + 1, 2_000_000, dtype=float)
    exact = np.sum(j ** (-3.0))
    assert ergodic_truncation_tail(model, H, J) == pytest.approx(exact, rel=0.05)


def test_degenerate_exact():
    assert degenerate_exact(1.0, math.exp(-3.0), 0.0, 1.0, 1.0, 1.0) == pytest.approx(2.0)
    a = degenerate_exact(2.0, 0.5, 0.3, 1.7, 0.2, 1.3)
    b = degenerate_exact(0.5, 2.0, 1.7, 0.3, 0.2, 1.3)
    assert a == pytest.approx(b)
    assert degenerate_exact(1.0, 0.5, 0.0, 1.0, 0.0, 2.0) == pytest.approx(math.log(2) / 2)
    with pytest.raises(DomainError):
        degenerate_exact(1.0, -1.0, 0.0, 1.0, 0.0, 1.0)
    with pytest.raises(DomainError):
        degenerate_exact(0.0, 1.0, 0.0, 1.0, 0.0, 1.0)
    with pytest.raises(DomainError):
        degenerate_exact(1.0, 2.0, 1.0, 1.0, 0.0, 1.0)


def test_statistics_are_reduced_in_mode_order(heat_modes):
    model, modes = heat_modes
    stats = [mode_statistics(u, tr) for u, tr in modes]
    a = mle(stats, model)
    b = mle(list(reversed(stats)), model)
    assert a.theta_hat == b.theta_hat
    assert isinstance(stats[0], ModeStatistics)
