"""Spectral densities of long-memory Gaussian inputs and their Hermite transforms.

The input density is ``f(lam) = |1 - exp(-i lam)|^(-2d) * fstar(lam)`` on
``(-pi, pi]``.  The spectral density of ``H_q(X)`` is ``q! * f^(*q)`` where
``f^(*q)`` is the q-fold periodic self-convolution computed here on a uniform
grid.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import gammaln

__all__ = [
    "MemoryModel",
    "PeriodicGrid",
    "NormalizationWarning",
    "farima",
    "white_noise",
    "eval_f",
    "normalization",
    "autocovariance",
    "farima_autocorrelation",
    "sample_f",
    "periodic_convolve",
    "self_convolve",
    "critical_order",
    "memory_param",
]

DEFAULT_GRID = 2**16
# points with |i - n/2| < _NEAR are replaced by the fitted local power law
_NEAR = 4
_FIT_SPAN = 16


class NormalizationWarning(UserWarning):
    """Raised (as a warning) when a model does not integrate to one."""


def _check_d(d):
    if not 0.0 < d < 0.5:
        raise ValueError(f"memory parameter must satisfy 0<d<1/2, got d={d}")


@dataclass(frozen=True)
class MemoryModel:
    """Gaussian input model ``f = |1-e^{-i lam}|^{-2d} fstar``.

    ``fstar_const`` is set when ``fstar`` is constant (the FARIMA(0,d,0)
    family); it enables closed-form autocovariances.  ``d = 0`` is accepted
    so that white noise can be expressed with the same type.
    """

    d: float
    fstar: Callable[[np.ndarray], np.ndarray]
    fstar_at_zero: float
    n_grid: int = DEFAULT_GRID
    fstar_const: float | None = None
    name: str = "custom"

    def __post_init__(self):
        if not 0.0 <= self.d < 0.5:
            raise ValueError(f"memory parameter must satisfy 0<d<1/2, got d={self.d}")
        if not self.fstar_at_zero > 0:
            raise ValueError("fstar must be positive at the origin")
        probe = np.asarray(self.fstar(10.0 ** -np.arange(3, 9, dtype=float)), dtype=float)
        if not np.allclose(probe, self.fstar_at_zero, rtol=1e-3, atol=0.0):
            raise ValueError("fstar is not continuous at 0 with the declared fstar_at_zero")

    def to_dict(self):
        out = {"d": self.d, "fstar": self.name, "n_grid": self.n_grid}
        if self.fstar_const is not None:
            out["fstar_const"] = self.fstar_const
        return out


def farima(d: float, n_grid: int = DEFAULT_GRID) -> MemoryModel:
    """FARIMA(0, d, 0) model with constant ``fstar`` scaled to unit variance."""
    if not 0.0 <= d < 0.5:
        raise ValueError(f"memory parameter must satisfy 0<d<1/2, got d={d}")
    # int |1-e^{-i lam}|^{-2d} d lam = 2 pi Gamma(1-2d) / Gamma(1-d)^2
    c = math.exp(2 * gammaln(1 - d) - gammaln(1 - 2 * d)) / (2 * math.pi)

    def fstar(lam, _c=c):
        return np.full(np.shape(lam), _c, dtype=float)

    return MemoryModel(d=d, fstar=fstar, fstar_at_zero=c, n_grid=n_grid,
                       fstar_const=c, name="farima")


def white_noise(n_grid: int = DEFAULT_GRID) -> MemoryModel:
    return farima(0.0, n_grid=n_grid)


def eval_f(model: MemoryModel, lam):
    """Evaluate the spectral density at ``lam`` (scalar or array, no zeros)."""
    lam = np.asarray(lam, dtype=float)
    if np.any(lam == 0):
        raise ValueError("spectral density has a pole at lam=0")
    out = np.abs(2.0 * np.sin(lam / 2.0)) ** (-2.0 * model.d) * model.fstar(lam)
    return out if out.ndim else float(out)


def farima_autocorrelation(d: float, n_max: int) -> np.ndarray:
    """Autocorrelation ``rho(0..n_max)`` of FARIMA(0, d, 0)."""
    n = np.arange(n_max + 1, dtype=float)
    if d == 0:
        return (n == 0).astype(float)
    rho = np.exp(gammaln(n + d) - gammaln(n - d + 1) + gammaln(1 - d) - gammaln(d))
    rho[0] = 1.0
    return rho


def _remainder_coeffs(model, n_max):
    # Fourier coefficients of (fstar - fstar(0)) |1-e^{-i lam}|^{-2d}, which is
    # continuous and vanishes at 0; periodic trapezoid on a fine grid.
    n = max(model.n_grid, 4 * (n_max + 1))
    n = 1 << (n - 1).bit_length()
    lam = 2 * np.pi * np.arange(n) / n
    lam[lam > np.pi] -= 2 * np.pi
    vals = np.zeros(n)
    nz = lam != 0
    vals[nz] = (model.fstar(lam[nz]) - model.fstar_at_zero) * np.abs(
        2 * np.sin(lam[nz] / 2)) ** (-2 * model.d)
    coeffs = np.fft.fft(vals).real * (2 * np.pi / n)
    return coeffs[: n_max + 1]


def autocovariance(model: MemoryModel, n_max: int) -> np.ndarray:
    """Autocovariance ``r(0..n_max)`` of the Gaussian input.

    The pole is handled by subtraction: ``fstar(0) |1-e^{-i lam}|^{-2d}`` has
    closed-form Fourier coefficients, and the continuous remainder is
    integrated by the periodic trapezoid rule.  A :class:`NormalizationWarning`
    is emitted when ``r(0)`` differs from one by more than ``1e-6``.
    """
    if n_max < 0:
        raise ValueError("n_max must be non-negative")
    d = model.d
    scale = math.exp(gammaln(1 - 2 * d) - 2 * gammaln(1 - d)) * 2 * math.pi
    r = model.fstar_at_zero * scale * farima_autocorrelation(d, n_max)
    if model.fstar_const is None:
        r = r + _remainder_coeffs(model, n_max)
    if abs(r[0] - 1.0) > 1e-6:
        warnings.warn(f"model is not normalized: r(0)={r[0]:.8g}", NormalizationWarning,
                      stacklevel=2)
    return r


def normalization(model: MemoryModel) -> float:
    """Total mass ``int_{-pi}^{pi} f``."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NormalizationWarning)
        return float(autocovariance(model, 0)[0])


@dataclass(frozen=True)
class PeriodicGrid:
    """A 2pi-periodic function sampled at ``lam_i = -pi + 2 pi i / n``.

    ``singular_exponent`` records a known ``|lam|^-beta`` blow-up at the
    origin (grid index ``n // 2``), where the stored value is ``inf``.
    """

    values: np.ndarray
    singular_exponent: float | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        n = v.size
        if v.ndim != 1 or n < 2 or n % 2:
            raise ValueError("grid size must be a positive even integer")
        mask = np.ones(n, dtype=bool)
        mask[n // 2] = False
        if not np.all(np.isfinite(v[mask])):
            raise ValueError("grid values must be finite away from the origin")

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def step(self) -> float:
        return 2 * np.pi / self.n

    @property
    def lam(self) -> np.ndarray:
        return -np.pi + self.step * np.arange(self.n)

    @property
    def beta(self) -> float:
        return self.singular_exponent or 0.0

    def scaled(self) -> np.ndarray:
        """``values * |lam|^beta`` with the origin filled by the fitted amplitude."""
        lam = self.lam
        with np.errstate(invalid="ignore"):
            s = self.values * np.abs(lam) ** self.beta
        if self.beta > 0:
            s[self.n // 2] = _fit_amplitude(lam, s, self.n)
        return s

    def to_csv(self, path, header_lines=()):
        with open(path, "w", newline="") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            w = csv.writer(fh)
            w.writerow(["lambda", "value"])
            for lam, v in zip(self.lam, self.values):
                w.writerow([repr(float(lam)), repr(float(v))])

    @classmethod
    def from_csv(cls, path, singular_exponent=None):
        lam, vals = [], []
        with open(path, newline="") as fh:
            rows = csv.reader(line for line in fh if not line.startswith("#"))
            header = next(rows)
            if header != ["lambda", "value"]:
                raise ValueError(f"unexpected header {header}")
            for a, b in rows:
                lam.append(float(a))
                vals.append(float(b))
        grid = cls(np.array(vals), singular_exponent)
        if not np.allclose(grid.lam, lam, atol=1e-12):
            raise ValueError("lambda column does not match the uniform grid")
        return grid


def _fit_amplitude(lam, s, n):
    c = n // 2
    idx = np.r_[c - 2 * _NEAR: c - _NEAR + 1, c + _NEAR: c + 2 * _NEAR + 1]
    return float(np.mean(s[idx]))


def sample_f(model: MemoryModel, n: int | None = None) -> PeriodicGrid:
    n = n or model.n_grid
    lam = -np.pi + 2 * np.pi * np.arange(n) / n
    vals = np.empty(n)
    nz = lam != 0
    vals[nz] = eval_f(model, lam[nz])
    vals[~nz] = np.inf if model.d > 0 else model.fstar_at_zero
    beta = 2 * model.d if model.d > 0 else None
    return PeriodicGrid(vals, beta)


def _cell_averages(grid: PeriodicGrid) -> np.ndarray:
    # Exact cell averages of s_k |u|^-beta with s frozen per cell.
    beta = grid.beta
    if beta == 0:
        return grid.values.copy()
    h = grid.step
    lam = grid.lam
    a = np.abs(lam - h / 2)
    b = np.abs(lam + h / 2)
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    avg = (hi ** (1 - beta) - lo ** (1 - beta)) / ((1 - beta) * h)
    c = grid.n // 2
    avg[c] = 2 * (h / 2) ** (1 - beta) / ((1 - beta) * h)
    return grid.scaled() * avg


def periodic_convolve(g1: PeriodicGrid, g2: PeriodicGrid) -> PeriodicGrid:
    """Periodic convolution ``int g1(u) g2(lam - u) du`` on the common grid.

    Cell averages absorb the power-law singularity at the origin exactly; the
    sum is evaluated by FFT.  If the output is singular (``beta1 + beta2 > 1``)
    the points within a few cells of the origin are replaced by the local
    power law fitted further out.
    """
    if g1.n != g2.n:
        raise ValueError(f"grid size mismatch: {g1.n} != {g2.n}")
    n, h = g1.n, g1.step
    a1, a2 = _cell_averages(g1), _cell_averages(g2)
    circ = np.fft.irfft(np.fft.rfft(a1) * np.fft.rfft(a2), n)
    # index of lam_i - lam_k is (i - k + n/2) mod n
    vals = h * np.roll(circ, -(n // 2))
    b1, b2 = g1.beta, g2.beta
    if b1 == 0 and b2 == 0:
        return PeriodicGrid(vals, None)
    lam = g1.lam
    c = n // 2
    near = np.abs(np.arange(n) - c) < _NEAR
    beta = b1 + b2 - 1
    if beta > 0:
        s = vals * np.abs(lam) ** beta
        s0 = _fit_amplitude(lam, s, n)
        with np.errstate(divide="ignore"):
            vals[near] = s0 * np.abs(lam[near]) ** -beta
        vals[c] = np.inf
        return PeriodicGrid(vals, beta)
    # bounded output with a cusp: value(lam) ~ a + b |lam|^(1 - b1 - b2)
    e = 1 - b1 - b2
    idx = np.r_[c - _FIT_SPAN: c - _NEAR + 1, c + _NEAR: c + _FIT_SPAN + 1]
    design = np.column_stack([np.ones(idx.size), np.abs(lam[idx]) ** e])
    coef, *_ = np.linalg.lstsq(design, vals[idx], rcond=None)
    vals[near] = coef[0] + coef[1] * np.abs(lam[near]) ** e
    return PeriodicGrid(vals, None)


def self_convolve(model: MemoryModel, q: int, n: int | None = None) -> PeriodicGrid:
    """``f^(*q)`` (without the ``q!`` factor) by iterated periodic convolution."""
    if q < 1:
        raise ValueError("q must be >= 1")
    f = sample_f(model, n)
    out = f
    for _ in range(q - 1):
        out = periodic_convolve(out, f)
    if out.singular_exponent is not None and model.d > 0:
        expected = max(2 * memory_param(model.d, q), 0.0)
        if not math.isclose(out.beta, expected, abs_tol=1e-12):
            raise AssertionError("singular exponent bookkeeping drifted")
    return out


def critical_order(d: float) -> int:
    """Largest integer ``q`` with ``q < 1/(1-2d)``."""
    _check_d(d)
    bound = 1.0 / (1.0 - 2.0 * d)
    return int(math.ceil(bound)) - 1


def memory_param(d: float, q: int) -> float:
    """Memory parameter ``q d + (1 - q)/2`` of ``H_q(X)``."""
    return q * d + (1 - q) / 2
