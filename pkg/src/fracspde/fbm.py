"""Fractional Brownian motion on a uniform grid.

Increments are fractional Gaussian noise drawn by circulant embedding of the
autocovariance (Davies and Harte), with a dense Cholesky fallback when the
embedding is not positive semidefinite. Every path is driven by its own
counter-based stream keyed by ``(base_seed, mode, replication)``, so results do
not depend on generation order or on how work is split between processes.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.fft as sfft
import scipy.linalg

from .spectral_model import check_hurst

__all__ = [
    "TimeGrid",
    "FbmPath",
    "GenerationError",
    "fbm_covariance",
    "fgn_autocovariance",
    "make_stream",
    "sample_fbm",
    "sample_fbm_batch",
    "sample_fbm_ensemble",
]


class GenerationError(RuntimeError):
    """Neither circulant embedding nor Cholesky produced a valid factorization."""


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``t_i = i T / n`` for ``i = 0..n``."""

    T: float
    n: int

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError(f"horizon must be positive, got {self.T}")
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"number of steps must be an integer >= 2, got {self.n}")

    @property
    def dt(self) -> float:
        return self.T / self.n

    @property
    def t(self) -> np.ndarray:
        return np.arange(self.n + 1) * self.dt

    def refine(self, factor: int) -> "TimeGrid":
        return TimeGrid(self.T, self.n * factor)


@dataclass(frozen=True)
class FbmPath:
    grid: TimeGrid
    H: float
    values: np.ndarray
    stream_id: tuple = field(default=())

    def to_csv(self, path) -> None:
        _write_columns(path, {"t": self.grid.t, "w": self.values})


def _write_columns(path, columns: dict) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    names = list(columns)
    cols = [np.asarray(columns[k]) for k in names]
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        for row in zip(*cols):
            writer.writerow([repr(float(x)) for x in row])


def fbm_covariance(H: float, t, s):
    """``E w(t) w(s) = (t^{2H} + s^{2H} - |t - s|^{2H}) / 2``."""
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    h2 = 2.0 * H
    out = 0.5 * (t**h2 + s**h2 - np.abs(t - s) ** h2)
    return out if out.ndim else float(out)


def fgn_autocovariance(H: float, n: int) -> np.ndarray:
    """Autocovariance ``gamma_0..gamma_n`` of unit-step fractional Gaussian noise."""
    k = np.arange(n + 1, dtype=float)
    h2 = 2.0 * H
    return 0.5 * ((k + 1.0) ** h2 - 2.0 * k**h2 + np.abs(k - 1.0) ** h2)


@lru_cache(maxsize=64)
def _embedding(H: float, m: int) -> np.ndarray | None:
    # square roots of the circulant eigenvalues, or None if the embedding is indefinite
    g = fgn_autocovariance(H, m)
    c = np.concatenate([g, g[-2:0:-1]])
    lam = sfft.rfft(c).real
    if lam.min() < -1e-10 * lam.max():
        return None
    lam = np.clip(lam, 0.0, None)
    # full-length spectrum for the complex transform
    full = np.concatenate([lam, lam[-2:0:-1]])
    full = np.sqrt(full / (2 * m))
    full.setflags(write=False)
    return full


@lru_cache(maxsize=16)
def _cholesky(H: float, n: int) -> np.ndarray:
    t = np.arange(1, n + 1, dtype=float)
    cov = fbm_covariance(H, t[:, None], t[None, :])
    try:
        return scipy.linalg.cholesky(cov, lower=True)
    except np.linalg.LinAlgError as exc:
        raise GenerationError(f"Cholesky factorization failed for H={H}, n={n}") from exc


def make_stream(base_seed: int, mode: int = 0, replication: int = 0) -> np.random.Generator:
    """Independent Philox stream for one ``(base_seed, mode, replication)`` triple."""
    ss = np.random.SeedSequence([int(base_seed), int(mode), int(replication)])
    return np.random.Generator(np.random.Philox(ss))


def _embedding_size(n: int) -> int:
    # pad to a power of two; the first n increments of a longer fGn have the same law
    return 1 << max(1, (n - 1).bit_length())


def _unit_fgn(H: float, n: int, streams: Sequence[np.random.Generator]) -> np.ndarray:
    """Rows of ``n`` unit-step fGn increments, one row per stream."""
    m = _embedding_size(n)
    root = _embedding(H, m)
    if root is None:
        warnings.warn(
            f"circulant embedding indefinite for H={H}, n={n}; using Cholesky",
            RuntimeWarning,
            stacklevel=3,
        )
        L = _cholesky(H, n)
        z = np.stack([rng.standard_normal(n) for rng in streams])
        path = z @ L.T
        return np.diff(path, axis=-1, prepend=0.0)
    xi = np.empty((len(streams), 2 * m), dtype=complex)
    for row, rng in zip(xi, streams):
        z = rng.standard_normal((2, 2 * m))
        row.real = z[0]
        row.imag = z[1]
    y = sfft.fft(root * xi, axis=-1)
    return y.real[:, :n]


def sample_fbm_batch(
    H: float,
    grid: TimeGrid,
    base_seed: int,
    mode: int,
    replications: Sequence[int],
) -> np.ndarray:
    """Paths ``w(t_0..t_n)`` as rows, replication ``r`` drawn from stream ``(base_seed, mode, r)``."""
    H = check_hurst(H)
    streams = [make_stream(base_seed, mode, r) for r in replications]
    inc = _unit_fgn(H, grid.n, streams) * grid.dt**H
    out = np.zeros((len(streams), grid.n + 1))
    np.cumsum(inc, axis=-1, out=out[:, 1:])
    return out


def sample_fbm(
    H: float,
    grid: TimeGrid,
    stream: np.random.Generator | tuple | int = 0,
) -> FbmPath:
    """One fBM path on ``grid``.

    Parameters
    ----------
    stream
        A generator, an integer base seed, or a ``(base_seed, mode, replication)``
        tuple. Tuples and integers are turned into a keyed Philox stream, which
        makes the path identical to the matching row of :func:`sample_fbm_batch`.
    """
    H = check_hurst(H)
    if isinstance(stream, np.random.Generator):
        inc = _unit_fgn(H, grid.n, [stream])[0] * grid.dt**H
        return FbmPath(grid, H, np.concatenate([[0.0], np.cumsum(inc)]), ())
    key = (int(stream), 0, 0) if np.isscalar(stream) else tuple(int(k) for k in stream)
    values = sample_fbm_batch(H, grid, key[0], key[1], [key[2]])[0]
    return FbmPath(grid, H, values, key)


def sample_fbm_ensemble(
    H: float,
    grid: TimeGrid,
    N: int,
    base_seed: int,
    replication: int = 0,
    modes: Sequence[int] | None = None,
) -> list[FbmPath]:
    """Independent paths for modes ``1..N`` (or the explicit ``modes``)."""
    if N < 1:
        raise ValueError("ensemble size must be at least 1")
    modes = range(1, N + 1) if modes is None else modes
    return [sample_fbm(H, grid, (base_seed, j, replication)) for j in modes]
