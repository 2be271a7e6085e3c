"""Closed-form Laplace transform of the mode energy and its first two moments.

For one mode with drift eigenvalue ``mu`` the energy ``E = int_0^T Q^2 dw_H`` has

    Psi(a) = E exp(-a E) = alpha exp((mu - alpha) T / 2) Delta(mu, alpha)^{-1/2},
    alpha = sqrt(mu^2 + 2a),

where ``Delta`` combines modified Bessel functions of orders ``-H`` and ``H-1``
at ``alpha T / 2`` with hyperbolic terms. Mean and variance of ``E`` are
``-Psi'(0)`` and ``Psi''(0) - Psi'(0)^2``. Every exponentially large factor is
cancelled analytically: Bessel functions enter only through
``exp(-x) I_p(x)``, so nothing overflows for large ``mu T``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .spectral_model import DomainError, check_hurst

__all__ = [
    "NumericError",
    "LaplaceEval",
    "LimitRow",
    "LimitTable",
    "X_SWITCH",
    "gamma_fn",
    "bessel_i",
    "bessel_i_scaled",
    "delta_T",
    "psi",
    "mean_energy",
    "var_energy",
    "lemma_limit_check",
    "branch_mismatch",
]

X_SWITCH = 30.0
_SERIES_TOL = 1e-17


class NumericError(ArithmeticError):
    """A closed form could not be evaluated in floating point."""


def gamma_fn(x: float) -> float:
    """Gamma function for ``x > 0``."""
    if not x > 0:
        raise DomainError(f"gamma_fn needs x > 0, got {x}")
    return math.gamma(x)


def _check_order(p: float) -> None:
    if not -1.0 < p < 1.0:
        raise DomainError(f"Bessel order must lie in (-1, 1), got {p}")


def _series(p: float, x: float) -> float:
    # sum_k (x/2)^{2k+p} / (k! Gamma(k+p+1)); every term is positive for p > -1
    h = 0.5 * x
    term = math.exp(p * math.log(h) - math.lgamma(p + 1.0))
    total = term
    q = h * h
    k = 0
    while True:
        k += 1
        term *= q / (k * (k + p))
        total += term
        if term < _SERIES_TOL * total:
            return total


def _asymptotic_scaled(p: float, x: float) -> float:
    # sqrt(2 pi x) exp(-x) I_p(x) ~ sum_k (-1)^k prod_{i<=k} (4p^2 - (2i-1)^2) / (k! (8x)^k)
    m4 = 4.0 * p * p
    term = 1.0
    total = 1.0
    k = 0
    while True:
        k += 1
        nxt = -term * (m4 - (2 * k - 1) ** 2) / (k * 8.0 * x)
        if abs(nxt) >= abs(term) or k > 200:
            break
        term = nxt
        total += term
        if abs(term) < 1e-17 * abs(total):
            break
    return total / math.sqrt(2.0 * math.pi * x)


def bessel_i_scaled(p: float, x: float) -> float:
    """``exp(-x) I_p(x)`` for ``x > 0`` and ``-1 < p < 1``."""
    _check_order(p)
    if not x > 0:
        raise DomainError(f"bessel_i needs x > 0, got {x}")
    if x <= X_SWITCH:
        return _series(p, x) * math.exp(-x)
    return _asymptotic_scaled(p, x)


def bessel_i(p: float, x: float) -> float:
    """Modified Bessel function ``I_p(x)`` of the first kind.

    Power series up to ``X_SWITCH`` and the large-argument expansion beyond it.
    Raises :class:`NumericError` when the result overflows.
    """
    _check_order(p)
    if not x > 0:
        raise DomainError(f"bessel_i needs x > 0, got {x}")
    if x <= X_SWITCH:
        return _series(p, x)
    s = bessel_i_scaled(p, x)
    try:
        return s * math.exp(x)
    except OverflowError as exc:
        raise NumericError(f"I_{p}({x}) overflows; use bessel_i_scaled") from exc


def branch_mismatch(p: float, x: float = X_SWITCH) -> float:
    """Relative gap between the series and the asymptotic branch at ``x``."""
    a = _series(p, x) * math.exp(-x)
    b = _asymptotic_scaled(p, x)
    return abs(a - b) / abs(a)


def _self_test() -> None:
    H_grid = (0.5, 0.6, 0.75, 0.9)
    orders = {q for H in H_grid for q in (-H, H - 1.0, 1.0 - H, H)}
    worst = max(branch_mismatch(p) for p in orders)
    if worst > 1e-9:
        raise NumericError(f"Bessel branches disagree by {worst:.2e} at x = {X_SWITCH}")


_self_test()


def _csc(H: float) -> float:
    s = math.sin(math.pi * H)
    if not s > 0:
        raise DomainError("sin(pi H) must be positive")
    return 1.0 / s


@dataclass(frozen=True)
class LaplaceEval:
    a: float
    mu: float
    H: float
    T: float
    alpha: float
    delta: float
    psi: float
    i_neg_h: float  # exp(-x) I_{-H}(x) at x = alpha T / 2
    i_h_minus_1: float  # exp(-x) I_{H-1}(x)


def _delta_parts(mu: float, alpha: float, H: float, T: float) -> tuple[float, float, float]:
    y = 0.5 * alpha * T
    i1 = bessel_i_scaled(-H, y)
    i2 = bessel_i_scaled(H - 1.0, y)
    e = math.exp(-2.0 * y)
    first = math.pi * alpha * T * (alpha * alpha - mu * mu) * _csc(H) / 4.0 * i1 * i2
    hyper = 0.5 * (alpha * (1.0 - e) + mu * (1.0 + e))
    return first + hyper * hyper, i1, i2


def delta_T(mu: float, alpha: float, H: float, T: float) -> float:
    """``Delta_T^H(mu, alpha)`` with ``exp(-alpha T)`` absorbed into the Bessel and hyperbolic factors."""
    H = check_hurst(H)
    if not (mu > 0 and alpha >= mu and T > 0):
        raise DomainError("delta_T needs alpha >= mu > 0 and T > 0")
    d, _, _ = _delta_parts(mu, alpha, H, T)
    if not math.isfinite(d):
        raise NumericError(f"Delta not finite at mu={mu}, alpha={alpha}, H={H}, T={T}")
    return d


def psi(a: float, mu: float, H: float, T: float) -> LaplaceEval:
    """Laplace transform ``E exp(-a int_0^T Q^2 dw_H)`` for ``a >= 0``."""
    H = check_hurst(H)
    if a < 0:
        raise DomainError("the transform is only defined here for a >= 0")
    if not (mu > 0 and T > 0):
        raise DomainError("psi needs mu > 0 and T > 0")
    alpha = math.sqrt(mu * mu + 2.0 * a)
    d, i1, i2 = _delta_parts(mu, alpha, H, T)
    if not (math.isfinite(d) and d > 0):
        raise NumericError(f"Delta = {d} at mu={mu}, a={a}, H={H}, T={T}")
    log_psi = math.log(alpha) + 0.5 * (mu - alpha) * T - 0.5 * math.log(d)
    return LaplaceEval(a, mu, H, T, alpha, d, math.exp(log_psi), i1, i2)


def mean_energy(mu: float, H: float, T: float) -> float:
    """``E int_0^T Q^2 dw_H = -dPsi/da`` at ``a = 0``."""
    H = check_hurst(H)
    if not (mu > 0 and T > 0):
        raise DomainError("mean_energy needs mu > 0 and T > 0")
    x = 0.5 * mu * T
    ii = bessel_i_scaled(H - 1.0, x) * bessel_i_scaled(-H, x)
    out = -(2.0 * math.exp(-mu * T) + 2.0 * (1.0 - mu * T) - mu * math.pi * T * ii * _csc(H)) / (4.0 * mu * mu)
    if not math.isfinite(out):
        raise NumericError("mean_energy not finite")
    return out


def var_energy(mu: float, H: float, T: float) -> float:
    """``Var int_0^T Q^2 dw_H = Psi''(0) - Psi'(0)^2``."""
    H = check_hurst(H)
    if not (mu > 0 and T > 0):
        raise DomainError("var_energy needs mu > 0 and T > 0")
    x = 0.5 * mu * T
    mT = mu * T
    E = math.exp(-mT)
    csc = _csc(H)
    i_1mh = bessel_i_scaled(1.0 - H, x)
    i_hm1 = bessel_i_scaled(H - 1.0, x)
    i_mh = bessel_i_scaled(-H, x)
    i_h = bessel_i_scaled(H, x)
    inner = (
        4.0 * (1.0 + mT - E) * i_hm1
        - 2.0 * mT * i_h
        + math.pi * mT * i_hm1 * i_hm1 * i_mh * csc
    )
    bracket = -2.0 * mT * i_1mh * i_hm1 + i_mh * inner
    num = 2.0 * E * E - 8.0 * E * (1.0 + mT) + 2.0 * (-5.0 + 2.0 * mT) + math.pi * mT * csc * bracket
    out = num / (8.0 * mu**4)
    if not math.isfinite(out):
        raise NumericError("var_energy not finite")
    return out


@dataclass(frozen=True)
class LimitRow:
    mu: float
    scaled_value: float
    abs_error: float


@dataclass(frozen=True)
class LimitTable:
    which: str
    H: float
    T: float
    rows: list[LimitRow]
    monotone: bool

    @property
    def target(self) -> float:
        return self.T / 2.0

    @property
    def final_relative_error(self) -> float:
        return self.rows[-1].abs_error / self.target

    def to_csv(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["mu", "scaled_value", "abs_error"])
            for r in self.rows:
                w.writerow([repr(r.mu), repr(r.scaled_value), repr(r.abs_error)])


def lemma_limit_check(which: str, H: float, T: float, mu_sequence: Sequence[float]) -> LimitTable:
    """Scaled moments against their large-``mu`` limit ``T/2``.

    ``which="A1"`` tabulates ``mu * mean_energy``; ``which="A2"`` tabulates
    ``mu^3 * var_energy``.
    """
    mus = [float(m) for m in mu_sequence]
    if any(m <= 0 for m in mus) or any(b <= a for a, b in zip(mus, mus[1:])):
        raise DomainError("mu_sequence must be positive and increasing")
    if which == "A1":
        scaled = [m * mean_energy(m, H, T) for m in mus]
    elif which == "A2":
        scaled = [m**3 * var_energy(m, H, T) for m in mus]
    else:
        raise ValueError("which must be 'A1' or 'A2'")
    rows = [LimitRow(m, v, abs(v - T / 2.0)) for m, v in zip(mus, scaled)]
    errs = [r.abs_error for r in rows]
    monotone = all(b <= a for a, b in zip(errs, errs[1:]))
    return LimitTable(which, float(H), float(T), rows, monotone)
