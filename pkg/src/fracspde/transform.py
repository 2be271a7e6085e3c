"""Fundamental-martingale transforms of a fractional mode.

With ``k_H(t, s) = s^{1/2-H} (t - s)^{1/2-H} / kappa_H`` and the clock
``w_H(t) = t^{2-2H} / lambda_H`` the observed mode ``u`` is mapped to

* ``psi(t) = int_0^t k_H(t, s) u(s) ds``,
* ``Q(t) = d psi / d w_H``,
* ``Z(t) = int_0^t k_H(t, s) du(s)``,
* ``M(t) = int_0^t k_H(t, s) dw(s)`` (simulation only, needs the driving fBM),

and ``Z = M - mu psi`` whenever ``du = -mu u dt + dw``. ``M`` is a Gaussian
martingale with bracket ``w_H``.

Two quadratures are offered for the Volterra sums behind ``Z`` and ``M``:

``"product"`` (default)
    Each factor of the kernel is replaced by its cell average, so the weight
    of increment ``l`` at time ``t_i`` is ``a_l a_{i-1-l}`` with
    ``a_l = (1/dt) int_{l dt}^{(l+1) dt} s^{1/2-H} ds``. The weights multiply
    increments that are themselves cell averages, which keeps the discrete
    ``M`` a martingale. The sums are a convolution, evaluated by FFT.
``"midpoint"``
    The kernel is evaluated at the cell midpoint.

``Q`` can be obtained either from ``Z`` through

    Q(t) = c_H ( t^{2H-1} Z(t) + int_0^t r^{2H-1} dZ(r) ),  c_H = lambda_H / (4 - 4H),

which only uses data up to ``t`` (``method="representation"``, the default),
or by central difference quotients of ``psi`` against the clock
(``method="quotient"``). The representation assumes ``u(0) = 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft as sfft

from .fbm import FbmPath, TimeGrid, _write_columns
from .fou import ModePath
from .spectral_model import DomainError, check_hurst

__all__ = [
    "KernelConstants",
    "TransformedMode",
    "kernel_constants",
    "clock",
    "kernel",
    "weighted_integral_psi",
    "psi_values",
    "compute_Q",
    "q_from_psi",
    "q_from_z",
    "compute_Z",
    "compute_M",
    "volterra",
    "transform_mode",
]


@dataclass(frozen=True)
class KernelConstants:
    H: float
    kappa: float
    lam: float

    @property
    def c(self) -> float:
        """Coefficient of the representation of ``Q`` through ``Z``."""
        return self.lam / (2.0 * (2.0 - 2.0 * self.H))


@lru_cache(maxsize=128)
def kernel_constants(H: float) -> KernelConstants:
    """``kappa_H = 2H G(3/2-H) G(H+1/2)`` and ``lambda_H = 2H G(3-2H) G(H+1/2) / G(3/2-H)``."""
    H = check_hurst(H)
    g = math.gamma
    kappa = 2.0 * H * g(1.5 - H) * g(H + 0.5)
    lam = 2.0 * H * g(3.0 - 2.0 * H) * g(H + 0.5) / g(1.5 - H)
    return KernelConstants(H, kappa, lam)


def clock(H: float, t):
    """``w_H(t) = t^{2-2H} / lambda_H``."""
    lam = kernel_constants(H).lam
    t = np.asarray(t, dtype=float)
    out = t ** (2.0 - 2.0 * H) / lam
    return out if out.ndim else float(out)


def kernel(H: float, t: float, s: float) -> float:
    """``k_H(t, s)`` for ``0 < s < t``."""
    if not 0.0 < s < t:
        raise DomainError(f"kernel needs 0 < s < t, got s={s}, t={t}")
    a = 0.5 - H
    return s**a * (t - s) ** a / kernel_constants(H).kappa


def _values(u) -> tuple[np.ndarray, float]:
    if isinstance(u, (ModePath, FbmPath)):
        return np.asarray(u.values, dtype=float), u.grid.dt
    raise TypeError("expected a ModePath or FbmPath")


def weighted_integral_psi(u: ModePath, H: float, i: int, m: int | None = None) -> float:
    """``psi(t_i)`` by the midpoint rule in ``v`` after ``s = t_i v``.

    ``psi(t_i) = t_i^{2-2H} / kappa_H * int_0^1 v^{1/2-H} (1-v)^{1/2-H} u(t_i v) dv``
    with ``u`` interpolated linearly. The default panel count ``m = max(4 i, 64)``
    places the midpoints on a fixed quarter-step lattice in ``t``.
    """
    H = check_hurst(H)
    x, dt = _values(u)
    if i < 1:
        raise DomainError("psi is evaluated at grid indices i >= 1")
    m = max(4 * i, 64) if m is None else int(m)
    ti = i * dt
    v = (np.arange(m) + 0.5) / m
    a = 0.5 - H
    f = np.interp(ti * v, np.arange(x.size) * dt, x)
    return float(ti ** (2.0 - 2.0 * H) / kernel_constants(H).kappa * np.sum(v**a * (1 - v) ** a * f) / m)


def _conv_prefix(b: np.ndarray, e: np.ndarray, n_out: int) -> np.ndarray:
    """``out[..., q] = sum_{k<=q} b[..., k] e[q-k]`` for ``q < n_out``."""
    L = sfft.next_fast_len(b.shape[-1] + e.shape[-1] - 1, real=True)
    out = sfft.irfft(sfft.rfft(b, L, axis=-1) * sfft.rfft(e, L), L, axis=-1)
    return out[..., :n_out]


def psi_values(x: np.ndarray, H: float, dt: float) -> np.ndarray:
    """``psi(t_i)`` for all ``i`` (last axis) with the default panel rule of :func:`weighted_integral_psi`.

    With ``4 i`` panels the quarter-lattice midpoints are shared between all
    ``i`` and the sums collapse to one convolution; indices with ``4 i < 64``
    are evaluated directly.
    """
    H = check_hurst(H)
    x = np.asarray(x, dtype=float)
    n = x.shape[-1] - 1
    a = 0.5 - H
    kap = kernel_constants(H).kappa
    t = np.arange(n + 1) * dt
    h = dt / 4.0
    k = np.arange(4 * n) + 0.5
    xm = _interp_last(x, t, k * h)
    wk = k**a
    out = np.zeros_like(x)
    conv = _conv_prefix(xm * wk, wk, 4 * n)
    idx = np.arange(1, n + 1)
    out[..., 1:] = kap**-1 * h ** (2.0 - 2.0 * H) * conv[..., 4 * idx - 1]
    small = idx[4 * idx < 64]
    if small.size:
        v = (np.arange(64) + 0.5) / 64
        wv = v**a * (1 - v) ** a / 64
        for i in small:
            ti = i * dt
            f = _interp_last(x, t, ti * v)
            out[..., i] = ti ** (2.0 - 2.0 * H) / kap * (f @ wv)
    return out


def _interp_last(x: np.ndarray, t: np.ndarray, s: np.ndarray) -> np.ndarray:
    # linear interpolation along the last axis at points s inside [t_0, t_n]
    dt = t[1] - t[0]
    pos = s / dt
    lo = np.minimum(np.floor(pos).astype(int), t.size - 2)
    frac = pos - lo
    return x[..., lo] * (1.0 - frac) + x[..., lo + 1] * frac


@lru_cache(maxsize=64)
def _cell_average_power(a: float, n: int) -> np.ndarray:
    l = np.arange(n + 1, dtype=float)
    out = np.diff(l ** (a + 1.0)) / (a + 1.0)
    out.setflags(write=False)
    return out


def volterra(x: np.ndarray, H: float, dt: float, scheme: str = "product") -> np.ndarray:
    """``int_0^{t_i} k_H(t_i, s) dx(s)`` for every grid index (last axis)."""
    H = check_hurst(H)
    x = np.asarray(x, dtype=float)
    n = x.shape[-1] - 1
    a = 0.5 - H
    kap = kernel_constants(H).kappa
    dx = np.diff(x, axis=-1)
    if scheme == "product":
        w = _cell_average_power(a, n)
    elif scheme == "midpoint":
        w = (np.arange(n) + 0.5) ** a
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    out = np.zeros_like(x)
    if H == 0.5:
        np.cumsum(dx, axis=-1, out=out[..., 1:])
        return out
    out[..., 1:] = _conv_prefix(w * dx, w, n) * dt ** (2.0 * a) / kap
    return out


def compute_Z(u: ModePath, H: float, i: int | None = None, scheme: str = "product"):
    """``Z(t_i) = int_0^{t_i} k_H(t_i, s) du(s)``; all indices when ``i`` is None."""
    x, dt = _values(u)
    Z = volterra(x, H, dt, scheme)
    return Z if i is None else float(Z[i])


def compute_M(w: FbmPath, H: float, i: int | None = None, scheme: str = "product"):
    """``M(t_i) = int_0^{t_i} k_H(t_i, s) dw(s)``; all indices when ``i`` is None."""
    x, dt = _values(w)
    M = volterra(x, H, dt, scheme)
    return M if i is None else float(M[i])


def q_from_z(Z: np.ndarray, H: float, dt: float) -> np.ndarray:
    """``Q`` from ``Z`` by the causal representation (right-continuous in the data)."""
    H = check_hurst(H)
    Z = np.asarray(Z, dtype=float)
    n = Z.shape[-1] - 1
    c = kernel_constants(H).c
    t = np.arange(n + 1) * dt
    if H == 0.5:
        return Z.copy()
    mid = (np.arange(n) + 0.5) * dt
    inner = np.zeros_like(Z)
    np.cumsum(mid ** (2.0 * H - 1.0) * np.diff(Z, axis=-1), axis=-1, out=inner[..., 1:])
    return c * (t ** (2.0 * H - 1.0) * Z + inner)


def q_from_psi(psi: np.ndarray, H: float, dt: float) -> np.ndarray:
    """``Q`` as clock difference quotients of ``psi``: central inside, one-sided at the ends, ``Q(t_0) = 0``."""
    psi = np.asarray(psi, dtype=float)
    n = psi.shape[-1] - 1
    if n < 4:
        raise DomainError("difference quotients need n >= 4")
    wH = clock(H, np.arange(n + 1) * dt)
    Q = np.zeros_like(psi)
    Q[..., 1:-1] = (psi[..., 2:] - psi[..., :-2]) / (wH[2:] - wH[:-2])
    Q[..., 1] = (psi[..., 1] - psi[..., 0]) / (wH[1] - wH[0])
    Q[..., -1] = (psi[..., -1] - psi[..., -2]) / (wH[-1] - wH[-2])
    return Q


def compute_Q(u: ModePath, H: float, method: str = "representation", scheme: str = "product") -> np.ndarray:
    """``Q(t_i) = d psi / d w_H`` on the grid.

    Parameters
    ----------
    method
        ``"representation"`` builds ``Q`` from ``Z`` without look-ahead and is
        what the estimators use. ``"quotient"`` differentiates ``psi`` against
        the clock; its central differences peek one step ahead, which biases
        Ito sums, but it also applies when ``u(0) != 0``.
    """
    x, dt = _values(u)
    if method == "representation":
        return q_from_z(volterra(x, H, dt, scheme), H, dt)
    if method == "quotient":
        return q_from_psi(psi_values(x, H, dt), H, dt)
    raise ValueError(f"unknown method {method!r}")


@dataclass(frozen=True)
class TransformedMode:
    grid: TimeGrid
    j: int
    H: float
    wH: np.ndarray
    psi: np.ndarray
    Q: np.ndarray
    Z: np.ndarray
    M: np.ndarray | None = None

    def to_csv(self, path) -> None:
        cols = {"t": self.grid.t, "w_H": self.wH, "psi": self.psi, "Q": self.Q, "Z": self.Z}
        cols["M"] = self.M if self.M is not None else np.full(self.grid.n + 1, np.nan)
        _write_columns(path, cols)


def transform_mode(
    u: ModePath,
    H: float,
    fbm: FbmPath | None = None,
    method: str = "representation",
    scheme: str = "product",
) -> TransformedMode:
    """All transforms of one mode; ``M`` is included when the driving path is supplied."""
    H = check_hurst(H)
    x, dt = _values(u)
    t = u.grid.t
    Z = volterra(x, H, dt, scheme)
    psi = psi_values(x, H, dt)
    Q = q_from_z(Z, H, dt) if method == "representation" else q_from_psi(psi, H, dt)
    M = None if fbm is None else volterra(fbm.values, H, dt, scheme)
    return TransformedMode(u.grid, u.j, H, clock(H, t), psi, Q, Z, M)
