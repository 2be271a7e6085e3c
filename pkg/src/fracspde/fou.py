"""Fractional Ornstein-Uhlenbeck modes built pathwise from fBM paths.

For ``du = -mu u dt + dw^H`` integration by parts gives

    u(t) = u0 exp(-mu t) + w(t) - mu * int_0^t exp(-mu (t - s)) w(s) ds,

which needs no stochastic integral against ``w``. The convolution is advanced
cell by cell with ``w`` linear inside each cell, so the recursion is exact for
piecewise-linear input and stable for any ``mu * dt``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.integrate
import scipy.signal
import scipy.special

from .fbm import FbmPath, TimeGrid, _write_columns
from .spectral_model import DomainError, check_hurst

__all__ = [
    "ModePath",
    "fou_from_fbm",
    "fou_values",
    "fou_variance_exact",
    "stationary_constant",
    "stationary_limit",
]


@dataclass(frozen=True)
class ModePath:
    grid: TimeGrid
    j: int
    mu: float
    values: np.ndarray
    u0: float = 0.0

    def to_csv(self, path) -> None:
        _write_columns(path, {"t": self.grid.t, "u": self.values})


def _step_weights(mu: float, dt: float) -> tuple[float, float, float]:
    """Coefficients of ``c_{i+1} = E c_i + a0 w_i + a1 (w_{i+1} - w_i)``."""
    x = mu * dt
    E = math.exp(-x)
    if abs(x) < 1e-6:
        # series limits; the exact forms lose all digits as x -> 0
        a0 = dt * (1.0 - x / 2.0 + x * x / 6.0)
        a1 = dt * (0.5 - x / 6.0 + x * x / 24.0)
    else:
        a0 = -math.expm1(-x) / mu
        a1 = (1.0 - a0 / dt) / mu
    return E, a0, a1


def fou_values(mu: float, u0: float, w: np.ndarray, dt: float) -> np.ndarray:
    """Mode values on the grid of ``w`` (last axis), rows treated independently."""
    w = np.asarray(w, dtype=float)
    if mu == 0.0:
        return u0 + w
    E, a0, a1 = _step_weights(mu, dt)
    drive = (a0 - a1) * w[..., :-1] + a1 * w[..., 1:]
    conv = np.zeros_like(w)
    conv[..., 1:] = scipy.signal.lfilter([1.0], [1.0, -E], drive, axis=-1)
    t = np.arange(w.shape[-1]) * dt
    return u0 * np.exp(-mu * t) + w - mu * conv


def fou_from_fbm(mu: float, u0: float, fbm: FbmPath, j: int = 1) -> ModePath:
    """Mode ``j`` driven by ``fbm`` with drift eigenvalue ``mu`` and initial value ``u0``."""
    values = fou_values(float(mu), float(u0), fbm.values, fbm.grid.dt)
    return ModePath(fbm.grid, j, float(mu), values, float(u0))


def stationary_constant(H: float) -> float:
    """``c(H) = H Gamma(2H)``, equal to ``H (2H - 1) Gamma(2H - 1)`` for ``H > 1/2``."""
    return H * math.gamma(2.0 * H)


def stationary_limit(mu: float, H: float) -> float:
    """Stationary variance ``c(H) / mu^{2H}``."""
    if mu <= 0:
        raise DomainError("stationary variance needs mu > 0")
    H = check_hurst(H)
    return stationary_constant(H) / mu ** (2.0 * H)


def fou_variance_exact(mu: float, H: float, t: float) -> float:
    """``E u(t)^2`` for a zero initial condition.

    For ``H > 1/2`` the double integral

        H (2H-1) exp(-2 mu t) int_0^t int_0^t exp(mu (s1 + s2)) |s1 - s2|^{2H-2} ds1 ds2

    is folded onto the triangle ``s2 < s1``; the inner integral in the lag is
    an incomplete gamma function, which leaves

        2 H Gamma(2H) mu^{1-2H} int_0^{mu t} exp(-2x) P(2H-1, mu t - x) dx / mu

    after the substitution ``x = mu (t - s1)``. The remaining integral is done
    by adaptive quadrature.
    """
    if mu <= 0:
        raise DomainError("exact variance assumes a decaying mode (mu > 0)")
    H = check_hurst(H)
    if t <= 0:
        return 0.0
    if H == 0.5:
        return -math.expm1(-2.0 * mu * t) / (2.0 * mu)
    a = 2.0 * H - 1.0
    X = mu * t

    def integrand(x):
        return math.exp(-2.0 * x) * scipy.special.gammainc(a, X - x)

    # the integrand is negligible past x ~ 20, and P(a, .) has a cusp at X - x = 0
    upper = min(X, 40.0)
    points = [p for p in (X - 1.0, X - 0.1) if 0.0 < p < upper]
    val, _ = scipy.integrate.quad(integrand, 0.0, upper, points=points or None, limit=200,
                                  epsabs=0.0, epsrel=1e-11)
    return 2.0 * H * math.gamma(2.0 * H) * mu ** (1.0 - 2.0 * H) * val / mu
