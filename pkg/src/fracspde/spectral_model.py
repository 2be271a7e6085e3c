"""Diagonalizable parameter-dependent equations reduced to eigenvalue sequences.

A model is the triple of closed-form sequences ``rho_j`` (eigenvalues of the
known operator), ``nu_j`` (eigenvalues of the operator multiplying the unknown
parameter) and, optionally, ``lambda_j`` (eigenvalues of the order-one operator
generating the Hilbert scale). The drift eigenvalue of mode ``j`` is
``mu_j(theta) = theta * nu_j + rho_j``.

Sequences are evaluated on demand, so a model never stores arrays and the
number of modes is unbounded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Mapping

import numpy as np

__all__ = [
    "Constant",
    "Power",
    "SqrtPower",
    "SpectralModel",
    "StructuralMeta",
    "Hurst",
    "DomainError",
    "UnsupportedOperation",
    "PositiveIndex",
    "ParabolicityReport",
    "SummabilityDiagnostic",
    "mu",
    "first_positive_index",
    "check_parabolicity",
    "check_gamma_summability",
    "fisher_normalizer",
    "classify_consistency",
    "preset",
    "model_from_dict",
]


class DomainError(ValueError):
    """An argument lies outside the domain where an operation is defined."""


class UnsupportedOperation(RuntimeError):
    """The model lacks data needed by the requested operation."""


def _index(j) -> np.ndarray:
    arr = np.asarray(j, dtype=float)
    if np.any(arr < 1):
        raise DomainError("mode indices start at 1")
    return arr


@dataclass(frozen=True)
class Constant:
    value: float

    def __call__(self, j):
        arr = _index(j)
        return np.full_like(arr, float(self.value)) if arr.ndim else float(self.value)

    def to_dict(self) -> dict:
        return {"kind": "constant", "value": self.value}


@dataclass(frozen=True)
class Power:
    """``scale * j**exponent``."""

    scale: float
    exponent: float

    def __call__(self, j):
        arr = _index(j)
        out = self.scale * arr**self.exponent
        return out if arr.ndim else float(out)

    def to_dict(self) -> dict:
        return {"kind": "power", "scale": self.scale, "exponent": self.exponent}


@dataclass(frozen=True)
class SqrtPower:
    """``(offset + scale * j**exponent) ** 0.5``, the usual ``sqrt(I - Laplacian)`` shape."""

    offset: float
    scale: float
    exponent: float

    def __call__(self, j):
        arr = _index(j)
        out = np.sqrt(self.offset + self.scale * arr**self.exponent)
        return out if arr.ndim else float(out)

    def to_dict(self) -> dict:
        return {
            "kind": "sqrt_power",
            "offset": self.offset,
            "scale": self.scale,
            "exponent": self.exponent,
        }


_SEQUENCE_KINDS = {"constant": Constant, "power": Power, "sqrt_power": SqrtPower}


def sequence_from_dict(spec: Mapping[str, Any]):
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind not in _SEQUENCE_KINDS:
        raise ValueError(f"unknown sequence kind {kind!r}; expected one of {sorted(_SEQUENCE_KINDS)}")
    return _SEQUENCE_KINDS[kind](**spec)


@dataclass(frozen=True)
class StructuralMeta:
    """Spatial dimension ``d``, order ``2m`` of the full operator, order ``m1`` of the parameter operator."""

    d: float
    two_m: float
    m1: float


@dataclass(frozen=True)
class Hurst:
    value: float

    def __post_init__(self):
        if not (0.5 <= self.value < 1.0):
            raise DomainError(f"Hurst index must lie in [1/2, 1), got {self.value}")

    def __float__(self) -> float:
        return float(self.value)


def check_hurst(H: float) -> float:
    return float(Hurst(float(H)))


@dataclass(frozen=True)
class SpectralModel:
    rho: Any
    nu: Any
    lam: Any = None
    theta_domain: tuple[float, float] = (-math.inf, math.inf)
    meta: StructuralMeta | None = None
    name: str = "custom"

    def __post_init__(self):
        lo, hi = self.theta_domain
        if not lo < hi:
            raise ValueError(f"theta domain must be a nonempty open interval, got {self.theta_domain}")

    def contains(self, theta: float) -> bool:
        lo, hi = self.theta_domain
        return lo < theta < hi

    def require_theta(self, theta: float) -> None:
        if not self.contains(theta):
            raise DomainError(f"theta={theta} outside the open interval {self.theta_domain}")

    def mu(self, theta: float, j):
        self.require_theta(theta)
        return theta * self.nu(j) + self.rho(j)

    def to_dict(self) -> dict:
        out = {
            "name": self.name,
            "rho": self.rho.to_dict(),
            "nu": self.nu.to_dict(),
            "theta_domain": [_json_float(x) for x in self.theta_domain],
        }
        if self.lam is not None:
            out["lambda"] = self.lam.to_dict()
        if self.meta is not None:
            out["meta"] = {"d": self.meta.d, "two_m": self.meta.two_m, "m1": self.meta.m1}
        return out


def _json_float(x: float):
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def mu(model: SpectralModel, theta: float, j):
    """Drift eigenvalue ``theta * nu_j + rho_j`` of mode ``j``."""
    return model.mu(theta, j)


@dataclass(frozen=True)
class PositiveIndex:
    J: int | None
    j_max: int
    note: str = "positivity verified on [J, j_max] only"

    @property
    def found(self) -> bool:
        return self.J is not None


def first_positive_index(model: SpectralModel, theta: float, j_max: int = 10_000) -> PositiveIndex:
    """Smallest ``J`` such that ``mu_j(theta) > 0`` for every ``J <= j <= j_max``."""
    j = np.arange(1, j_max + 1)
    bad = np.nonzero(model.mu(theta, j) <= 0)[0]
    if bad.size == 0:
        return PositiveIndex(1, j_max)
    last_bad = int(j[bad[-1]])
    if last_bad == j_max:
        return PositiveIndex(None, j_max, note="no positive tail up to j_max")
    return PositiveIndex(last_bad + 1, j_max)


@dataclass(frozen=True)
class ParabolicityReport:
    passed: bool
    C1: float
    delta: float | None
    C2: float | None
    j_max: int
    note: str = "finite-j certificate on [1, j_max]; not a proof"


def _bounded_above(s: np.ndarray, j_max: int) -> bool:
    # a sequence whose top-decade maximum exceeds everything before it is read as growing
    split = max(1, j_max // 10)
    head, tail = s[..., :split].max(), s[..., split:].max()
    return bool(tail <= head + 1e-9 * (1.0 + abs(head)))


def check_parabolicity(
    model: SpectralModel,
    theta_samples,
    two_m: float,
    j_max: int = 10_000,
) -> ParabolicityReport:
    """Check the eigenvalue form of the parabolicity conditions over sampled ``theta``.

    ``C1`` is the largest observed ``lambda_j**(-2m) |mu_j|``. ``delta`` is the
    largest value (found by bisection) for which ``-2 mu_j + delta lambda_j**(2m)``
    stops growing over the top decade of ``j``; ``C2`` is its maximum.
    """
    if model.lam is None:
        raise UnsupportedOperation("model has no lambda sequence")
    j = np.arange(1, j_max + 1, dtype=float)
    lam2m = np.asarray(model.lam(j)) ** two_m
    mus = np.array([model.mu(th, j) for th in np.atleast_1d(theta_samples)])
    C1 = float(np.max(np.abs(mus) / lam2m))

    def s(delta):
        return -2.0 * mus + delta * lam2m

    hi = 4.0 * (1.0 + float(np.max(2.0 * np.abs(mus) / lam2m)))
    if _bounded_above(s(hi), j_max):
        delta = hi
    else:
        lo = 0.0
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if _bounded_above(s(mid), j_max):
                lo = mid
            else:
                hi = mid
        delta = lo
    if delta <= 1e-12:
        return ParabolicityReport(False, C1, None, None, j_max)
    return ParabolicityReport(True, C1, delta, float(np.max(s(delta))), j_max)


@dataclass(frozen=True)
class SummabilityDiagnostic:
    partial_sum: float
    exponent: float
    verdict: str  # "convergent" | "divergent" | "inconclusive"
    j_max: int


def check_gamma_summability(
    model: SpectralModel,
    theta: float,
    gamma: float,
    j_max: int = 10_000,
    tol: float = 0.05,
) -> SummabilityDiagnostic:
    """Partial sum of ``(1 + |mu_j|)**(-gamma)`` and a power-law verdict.

    The growth exponent of ``|mu_j|`` is fitted by least squares on log-log
    data over the top decade ``[j_max/10, j_max]``; the series is judged
    convergent when ``exponent * gamma > 1 + tol``.
    """
    if gamma <= 0:
        raise DomainError("gamma must be positive")
    j = np.arange(1, j_max + 1, dtype=float)
    m = np.abs(model.mu(theta, j))
    partial = float(np.sum((1.0 + m) ** (-gamma)))
    top = j >= j_max / 10
    with np.errstate(divide="ignore"):
        logm = np.log(m[top])
    ok = np.isfinite(logm)
    if ok.sum() < 2:
        return SummabilityDiagnostic(partial, float("nan"), "inconclusive", j_max)
    exponent = float(np.polyfit(np.log(j[top][ok]), logm[ok], 1)[0])
    score = exponent * gamma
    if score > 1 + tol:
        verdict = "convergent"
    elif score < 1 - tol:
        verdict = "divergent"
    else:
        verdict = "inconclusive"
    return SummabilityDiagnostic(partial, exponent, verdict, j_max)


def fisher_normalizer(model: SpectralModel, theta: float, N: int, J: int = 1) -> float:
    """``sum_{j=J}^{N} nu_j**2 / mu_j(theta)``; zero for an empty range."""
    if N < J:
        return 0.0
    j = np.arange(J, N + 1, dtype=float)
    m = model.mu(theta, j)
    if np.any(m <= 0):
        raise DomainError(f"mu_j(theta) <= 0 for some j in [{J}, {N}]")
    return float(np.sum(np.asarray(model.nu(j)) ** 2 / m))


def classify_consistency(model: SpectralModel) -> str:
    """``divergent`` (consistent regime) iff ``m1 >= m - d/2``; ``unknown`` without metadata."""
    if model.meta is None:
        return "unknown"
    m = model.meta.two_m / 2.0
    return "divergent" if model.meta.m1 >= m - model.meta.d / 2.0 else "convergent"


def heat_periodic(scale: float = math.pi**2) -> SpectralModel:
    """``du - theta u_xx dt = dW^H`` on the unit interval.

    ``mu_j = theta * scale * j**2`` with ``scale = pi**2`` by default; ``lambda_j``
    uses the same constant so the preset is self-consistent for any choice.
    """
    return SpectralModel(
        rho=Constant(0.0),
        nu=Power(scale, 2.0),
        lam=SqrtPower(1.0, scale, 2.0),
        theta_domain=(0.0, math.inf),
        meta=StructuralMeta(d=1, two_m=2, m1=2),
        name="heat_periodic",
    )


def laplacian_plus_theta(d: int = 2, c: float = 1.0, nu: float = -1.0) -> SpectralModel:
    """``du - (Laplacian u + theta u) dt = dW^H`` on a bounded domain in R^d.

    Dirichlet eigenvalues are replaced by their asymptotic law ``c j**(2/d)``.
    With the default ``nu = -1`` the drift eigenvalue is ``c j**(2/d) - theta``.
    """
    if d < 1:
        raise ValueError("dimension must be a positive integer")
    return SpectralModel(
        rho=Power(c, 2.0 / d),
        nu=Constant(nu),
        lam=SqrtPower(1.0, c, 2.0 / d),
        theta_domain=(-math.inf, math.inf),
        meta=StructuralMeta(d=d, two_m=2, m1=0),
        name=f"laplacian_plus_theta(d={d})",
    )


_PRESETS = {"heat_periodic": heat_periodic, "laplacian_plus_theta": laplacian_plus_theta}


def preset(name: str, **params) -> SpectralModel:
    try:
        factory = _PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; expected one of {sorted(_PRESETS)}") from None
    return factory(**params)


def _parse_bound(x) -> float:
    if isinstance(x, str):
        return float(x.replace("infinity", "inf"))
    return float(x)


def model_from_dict(spec: Mapping[str, Any]) -> SpectralModel:
    """Build a model from ``{"preset": name, "params": {...}}`` or an inline description."""
    if "preset" in spec:
        extra = set(spec) - {"preset", "params"}
        if extra:
            raise ValueError(f"preset models take parameters under 'params', got keys {sorted(extra)}")
        return preset(spec["preset"], **dict(spec.get("params", {})))
    extra = set(spec) - {"rho", "nu", "lambda", "theta_domain", "meta", "name"}
    if extra:
        raise ValueError(f"unknown model keys {sorted(extra)}")
    meta = spec.get("meta")
    domain = spec.get("theta_domain", ["-inf", "inf"])
    return SpectralModel(
        rho=sequence_from_dict(spec["rho"]),
        nu=sequence_from_dict(spec["nu"]),
        lam=sequence_from_dict(spec["lambda"]) if "lambda" in spec else None,
        theta_domain=(_parse_bound(domain[0]), _parse_bound(domain[1])),
        meta=StructuralMeta(**meta) if meta else None,
        name=spec.get("name", "custom"),
    )
