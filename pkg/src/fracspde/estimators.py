"""Estimators of the drift parameter from observed modes.

Every likelihood-based estimator is a function of two per-mode integrals,

    A_j = int_0^T Q_j dZ_j,        B_j = int_0^T Q_j^2 dw_H,

so modes may live on different grids. Two discretisations of ``A`` exist:

``"left"``
    the left-point sum ``sum Q(t_l) (Z(t_{l+1}) - Z(t_l))``;
``"ito"`` (default)
    the Ito formula for ``Q^2`` rewrites the stochastic integral as

        A = g(T) Q(T)^2 / 2 + int_0^T f dt - T/2,
        g(t) = t^{1-2H} / (2 c_H),  f = (H - 1/2) (Q / t) (g Q - Z),

    an identity in continuous time that removes the ``O(mu dt)`` bias of the
    left-point sum. For ``H = 1/2`` it is ``(u(T)^2 - u(0)^2 - T) / 2``.

``B`` is always a left-point sum against clock increments.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .fou import ModePath, stationary_constant
from .spectral_model import DomainError, SpectralModel, check_hurst, fisher_normalizer
from .transform import TransformedMode, clock, kernel_constants

__all__ = [
    "DegenerateDataError",
    "ModeStatistics",
    "EstimateResult",
    "ito_integral",
    "energy_integral",
    "mode_statistics",
    "white_statistics",
    "mle",
    "mle_from_statistics",
    "mle_white",
    "log_likelihood",
    "log_likelihood_from_statistics",
    "normalized_error",
    "longtime_single_mode",
    "ergodic_single_mode",
    "ergodic_all_modes",
    "ergodic_truncation_tail",
    "degenerate_exact",
]

RULES = ("ito", "left")


class DegenerateDataError(ValueError):
    """The data carry no information about the parameter (zero denominator)."""


@dataclass(frozen=True)
class ModeStatistics:
    """Sufficient statistics of one mode: ``A = int Q dZ`` and ``B = int Q^2 dw_H``."""

    j: int
    A: float
    B: float
    C: float | None = None  # int Q dM, simulation diagnostics only


@dataclass
class EstimateResult:
    theta_hat: float
    N: int
    numerator: float
    denominator: float
    fisher_I_N: float | None = None
    normalized_error: float | None = None
    theta_true: float | None = None
    modes: list[int] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)


def ito_integral(Q: np.ndarray, Z: np.ndarray, H: float, dt: float, rule: str = "ito") -> np.ndarray:
    """``int_0^T Q dZ`` along the last axis."""
    Q = np.asarray(Q, dtype=float)
    Z = np.asarray(Z, dtype=float)
    if rule == "left":
        return np.sum(Q[..., :-1] * np.diff(Z, axis=-1), axis=-1)
    if rule != "ito":
        raise ValueError(f"unknown rule {rule!r}; expected one of {RULES}")
    H = check_hurst(H)
    n = Q.shape[-1] - 1
    T = n * dt
    c = kernel_constants(H).c
    t = np.arange(1, n + 1) * dt
    g = t ** (1.0 - 2.0 * H) / (2.0 * c)
    boundary = 0.5 * g[-1] * Q[..., -1] ** 2
    if H == 0.5:
        return boundary - 0.5 * T
    q, z = Q[..., 1:], Z[..., 1:]
    f = (H - 0.5) * (q / t) * (g * q - z)
    # f is bounded but not defined at t = 0: right point on the first cell, trapezoid after
    drift = dt * (f[..., 0] + 0.5 * (f[..., :-1] + f[..., 1:]).sum(axis=-1))
    return boundary + drift - 0.5 * T


def energy_integral(Q: np.ndarray, H: float, dt: float) -> np.ndarray:
    """``int_0^T Q^2 dw_H`` as a left-point sum against clock increments."""
    Q = np.asarray(Q, dtype=float)
    n = Q.shape[-1] - 1
    dwH = np.diff(clock(H, np.arange(n + 1) * dt))
    return np.sum(Q[..., :-1] ** 2 * dwH, axis=-1)


def mode_statistics(mode: ModePath, tr: TransformedMode, rule: str = "ito") -> ModeStatistics:
    dt = tr.grid.dt
    A = float(ito_integral(tr.Q, tr.Z, tr.H, dt, rule))
    B = float(energy_integral(tr.Q, tr.H, dt))
    C = None
    if tr.M is not None:
        C = float(np.sum(tr.Q[:-1] * np.diff(tr.M)))
    return ModeStatistics(mode.j, A, B, C)


def white_statistics(mode: ModePath, rule: str = "ito") -> ModeStatistics:
    """``A = int u du`` and ``B = int u^2 ds`` for Brownian noise."""
    u = np.asarray(mode.values, dtype=float)
    dt = mode.grid.dt
    if rule == "left":
        A = float(np.sum(u[:-1] * np.diff(u)))
    elif rule == "ito":
        A = 0.5 * (u[-1] ** 2 - u[0] ** 2 - mode.grid.T)
    else:
        raise ValueError(f"unknown rule {rule!r}; expected one of {RULES}")
    B = float(np.sum(u[:-1] ** 2) * dt)
    return ModeStatistics(mode.j, float(A), B)


def _as_statistics(modes, rule: str) -> list[ModeStatistics]:
    out = []
    for item in modes:
        if isinstance(item, ModeStatistics):
            out.append(item)
        else:
            mode, tr = item
            if abs(float(mode.values[0])) > 0:
                raise DomainError("likelihood estimators assume a zero initial condition")
            out.append(mode_statistics(mode, tr, rule))
    return out


def mle_from_statistics(
    stats: Sequence[ModeStatistics],
    model: SpectralModel,
    theta_true: float | None = None,
) -> EstimateResult:
    """``theta_hat = -sum nu_j (A_j + rho_j B_j) / sum nu_j^2 B_j``, reduced in mode order."""
    if not stats:
        raise DegenerateDataError("no modes supplied")
    stats = sorted(stats, key=lambda s: s.j)
    num = 0.0
    den = 0.0
    for s in stats:
        nu = float(model.nu(s.j))
        rho = float(model.rho(s.j))
        num += nu * (s.A + rho * s.B)
        den += nu * nu * s.B
    if den == 0.0 or not math.isfinite(den):
        raise DegenerateDataError("zero energy: the parameter is not identifiable from these paths")
    res = EstimateResult(-num / den, len(stats), num, den, modes=[s.j for s in stats])
    if theta_true is not None:
        js = [s.j for s in stats]
        res.theta_true = float(theta_true)
        res.fisher_I_N = _fisher(model, theta_true, js)
        res.normalized_error = normalized_error(res, theta_true)
    return res


def _fisher(model: SpectralModel, theta: float, js: Sequence[int]) -> float:
    js = np.asarray(js)
    if np.array_equal(js, np.arange(js[0], js[0] + js.size)):
        return fisher_normalizer(model, theta, int(js[-1]), int(js[0]))
    m = model.mu(theta, js.astype(float))
    if np.any(m <= 0):
        raise DomainError("mu_j(theta) <= 0 for some observed mode")
    return float(np.sum(np.asarray(model.nu(js.astype(float))) ** 2 / m))


def mle(
    modes: Iterable,
    model: SpectralModel,
    theta_true: float | None = None,
    rule: str = "ito",
) -> EstimateResult:
    """Spectral maximum likelihood estimator from ``(ModePath, TransformedMode)`` pairs.

    Items may also be precomputed :class:`ModeStatistics`.
    """
    return mle_from_statistics(_as_statistics(modes, rule), model, theta_true)


def mle_white(
    modes: Sequence[ModePath],
    model: SpectralModel,
    H: float = 0.5,
    theta_true: float | None = None,
    rule: str = "ito",
) -> EstimateResult:
    """Estimator for Brownian noise, computed directly on the mode paths."""
    if H != 0.5:
        raise DomainError("the Brownian form of the estimator needs H = 1/2")
    return mle_from_statistics([white_statistics(m, rule) for m in modes], model, theta_true)


def log_likelihood_from_statistics(theta: float, stats: Sequence[ModeStatistics], model: SpectralModel) -> float:
    model.require_theta(theta)
    out = 0.0
    for s in sorted(stats, key=lambda s: s.j):
        m = float(model.mu(theta, s.j))
        out += -m * s.A - 0.5 * m * m * s.B
    return out


def log_likelihood(theta: float, modes, model: SpectralModel, rule: str = "ito") -> float:
    """``-sum mu_j(theta) A_j - sum mu_j(theta)^2 B_j / 2`` with the sums used by :func:`mle`."""
    model.require_theta(theta)
    return log_likelihood_from_statistics(theta, _as_statistics(modes, rule), model)


def normalized_error(result: EstimateResult, theta_true: float) -> float:
    """``sqrt(I_N) (theta_hat - theta_true)``."""
    I = result.fisher_I_N
    if I is None or not I > 0:
        raise DomainError("normalized error needs a positive Fisher normalizer")
    return math.sqrt(I) * (result.theta_hat - theta_true)


def longtime_single_mode(mode, rho: float, nu: float, rule: str = "ito") -> float:
    """One-mode version of the likelihood estimator, consistent as ``T`` grows."""
    if nu == 0:
        raise DomainError("nu must be nonzero")
    s = mode if isinstance(mode, ModeStatistics) else _as_statistics([mode], rule)[0]
    den = nu * nu * s.B
    if den == 0.0:
        raise DegenerateDataError("zero energy")
    return -nu * (s.A + rho * s.B) / den


def _energy_trapezoid(u: ModePath) -> float:
    x = np.asarray(u.values, dtype=float) ** 2
    return float(u.grid.dt * (x.sum() - 0.5 * (x[0] + x[-1])))


def ergodic_single_mode(u: ModePath, rho: float, nu: float, H: float) -> float:
    """``(c(H) T / int u^2 dt)^{1/(2H)} / nu - rho / nu`` with ``c(H) = H Gamma(2H)``."""
    H = check_hurst(H)
    if nu == 0:
        raise DomainError("nu must be nonzero")
    energy = _energy_trapezoid(u)
    if not energy > 0:
        raise DomainError("zero energy")
    return (stationary_constant(H) * u.grid.T / energy) ** (1.0 / (2.0 * H)) / nu - rho / nu


def ergodic_all_modes(modes: Sequence[ModePath], model: SpectralModel, H: float) -> float:
    """All-mode ergodic estimator for models without a known operator part.

    Both series are truncated at the observed modes; the truncation index is the
    largest ``j`` supplied.
    """
    H = check_hurst(H)
    js = np.array([m.j for m in modes], dtype=float)
    if np.any(np.asarray(model.rho(js)) != 0):
        raise DomainError("all-mode ergodic estimator needs rho_j = 0")
    nu = np.asarray(model.nu(js), dtype=float)
    if np.any(nu <= 0):
        raise DomainError("all-mode ergodic estimator needs nu_j > 0")
    T = modes[0].grid.T
    energy = sum(_energy_trapezoid(m) for m in sorted(modes, key=lambda m: m.j))
    if not energy > 0:
        raise DomainError("zero energy")
    return (stationary_constant(H) * T * float(np.sum(nu ** (-2.0 * H))) / energy) ** (1.0 / (2.0 * H))


def ergodic_truncation_tail(model: SpectralModel, H: float, J: int) -> float:
    """Estimated ``sum_{j > J} nu_j^{-2H}`` from a power-law fit on ``[J/10, J]``.

    With ``nu_j ~ C j^p`` and ``q = 2 H p`` the tail is approximated by the
    integral from ``J + 1/2``; ``inf`` when ``q <= 1``.
    """
    H = check_hurst(H)
    if J < 10:
        raise DomainError("need J >= 10 for the power-law fit")
    j = np.arange(max(1, J // 10), J + 1, dtype=float)
    nu = np.asarray(model.nu(j), dtype=float)
    if np.any(nu <= 0):
        raise DomainError("tail bound needs nu_j > 0")
    p, logC = np.polyfit(np.log(j), np.log(nu), 1)
    q = 2.0 * H * p
    if q <= 1.0:
        return math.inf
    return math.exp(-2.0 * H * logC) * (J + 0.5) ** (1.0 - q) / (q - 1.0)


def degenerate_exact(u_s: float, u_t: float, s: float, t: float, rho: float, nu: float) -> float:
    """Exact recovery from a mode without noise: ``ln(u_s / u_t) / (nu (t - s)) - rho / nu``."""
    if t == s:
        raise DomainError("need two distinct times")
    if nu == 0:
        raise DomainError("nu must be nonzero")
    if u_s == 0 or u_t == 0 or (u_s > 0) != (u_t > 0):
        raise DomainError("values must be nonzero with a common sign")
    return math.log(u_s / u_t) / (nu * (t - s)) - rho / nu
