"""Second-order structure of the limit field ``Y^{(q,K)}_{m,k}``.

For a chaos order ``q`` the covariance reduces to one dimension:

    Cov = q! (gb gb')^{1/2} Gamma(q, d)
          * Re int_R e^{i s D} h(gb s) conj h(gb' s) |s|^{-2 d(q) - 2K} ds,

with ``h`` the limit wavelet transfer function, ``gb = gamma_bar(m)`` and
``D = k gb - k' gb'``.  The integrand is rewritten with
``h(u) / (i u)^K`` so that no cancellation occurs near the origin.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.special import roots_jacobi

from .filters import FilterBank, check_uniform_smoothness
from .spectra import memory_param

__all__ = [
    "DivergenceError",
    "LimitSpec",
    "LimitCov",
    "gamma_factor",
    "membership_S",
    "limit_cov",
    "limit_cov_block",
    "ss_exponent",
    "theorem_normalization",
]

RTOL = 1e-6
MAX_BLOCKS = 24
_GL_HI, _GL_LO = 16, 8
_JAC_HI, _JAC_LO = 24, 12


class DivergenceError(ValueError):
    pass


def _check_order(q, d):
    if not 0 < d < 0.5:
        raise ValueError(f"need 0<d<1/2, got d={d}")
    if int(q) != q or q < 1:
        raise ValueError(f"q must be a positive integer, got {q}")
    if q * (1 - 2 * d) >= 1:
        raise DivergenceError(f"q={q} >= 1/(1-2d)={1 / (1 - 2 * d):.4g}: the limit integral diverges")


@lru_cache(maxsize=64)
def _jacobi(n, a, b):
    # weight (1-x)^a (1+x)^b on [-1, 1]
    x, w = roots_jacobi(n, a, b)
    return x, w


def _power_integral(a, b, nodes):
    """``int_R |t|^a |1-t|^b dt`` for ``a, b > -1`` and ``a + b < -1``.

    Split at 0 and 1 (and at -1, 2 for the tails); every piece becomes a
    Gauss-Jacobi rule with a smooth remaining factor.
    """
    total = 0.0
    # [0, 1]: t^a (1-t)^b is exactly the Jacobi weight
    x, w = _jacobi(nodes, b, a)
    total += 2.0 ** (-a - b - 1) * w.sum()
    # [1, inf): t = 1/u, u^{-a-b-2} (1-u)^b on [0, 1]
    c = -a - b - 2
    x, w = _jacobi(nodes, b, c)
    total += 2.0 ** (-b - c - 1) * w.sum()
    # (-inf, 0]: t = -s, s^a (1+s)^b; s in [0, 1] then s = 1/u
    x, w = _jacobi(nodes, 0.0, a)
    s = (1 + x) / 2
    total += 2.0 ** (-a - 1) * (w @ (1 + s) ** b)
    x, w = _jacobi(nodes, 0.0, c)
    u = (1 + x) / 2
    total += 2.0 ** (-c - 1) * (w @ (1 + u) ** b)
    return total


@lru_cache(maxsize=256)
def gamma_factor(q: int, d: float, nodes: int = 40) -> float:
    """``prod_{i=2}^q int_R |t|^{q-i-2d(q-i+1)} |1-t|^{-2d} dt``; 1 for ``q=1``."""
    _check_order(q, d)
    out = 1.0
    for i in range(2, q + 1):
        out *= _power_integral(q - i - 2 * d * (q - i + 1), -2 * d, nodes)
    return out


def ss_exponent(q: int, d: float, K: int) -> float:
    """Self-similarity index ``K + q d - q/2``."""
    _check_order(q, d)
    return K + q * d - q / 2


def theorem_normalization(c_q0: float, fstar0: float, q0: int):
    """The two candidate limit constants ``(c f0^{q/2}, c/q! f0^{q/2})``."""
    if c_q0 == 0:
        raise ValueError("c_q0 must be non-zero")
    base = fstar0 ** (q0 / 2)
    return c_q0 * base, c_q0 / math.factorial(q0) * base


def _shell(fn, lo, hi, panels):
    t, w = np.polynomial.legendre.leggauss(_GL_HI)
    edges = np.linspace(lo, hi, panels + 1)
    half = (edges[1:] - edges[:-1])[:, None] / 2
    mid = (edges[1:] + edges[:-1])[:, None] / 2
    x = (mid + half * t).ravel()
    return float(((half * w).ravel()) @ fn(x))


def membership_S(theta_hat: Callable, q: int, d: float, K: int, a_min: int = -40,
                 a_max: int = 12, slope_tol: float = 0.02, rtol: float = 1e-6):
    """Check ``int_R |theta(xi)|^2 |xi|^{q-1-2dq-2K} dxi < inf``.

    The integral is accumulated on dyadic shells ``[2^a, 2^{a+1}]`` (both
    signs), each refined until stable.  Divergence is detected from the slope
    of ``log2`` shell mass against ``a`` at both ends.  Returns
    ``(finite, value)`` with ``value = inf`` when divergent.
    """
    e = q - 1 - 2 * d * q - 2 * K

    def fn(x):
        v = np.abs(theta_hat(x)) ** 2 + np.abs(theta_hat(-x)) ** 2
        return v * x**e

    shells = []
    for a in range(a_min, a_max + 1):
        lo, hi = 2.0**a, 2.0 ** (a + 1)
        panels, prev = 4, _shell(fn, lo, hi, 4)
        while panels < 4096:
            panels *= 2
            cur = _shell(fn, lo, hi, panels)
            done = abs(cur - prev) <= rtol * max(abs(cur), 1e-300)
            prev = cur
            if done:
                break
        shells.append(prev)
    shells = np.array(shells)
    a = np.arange(a_min, a_max + 1, dtype=float)
    if not np.all(np.isfinite(shells)):
        return False, math.inf

    def slope(sel, end):
        s = shells[sel]
        if s[end] == 0 or np.any(s <= 0):
            return None
        return np.polyfit(a[sel], np.log2(s), 1)[0]

    lo_slope = slope(slice(0, 4), 0)
    hi_slope = slope(slice(-4, None), -1)
    finite = True
    total = float(shells.sum())
    if lo_slope is not None:
        if lo_slope <= slope_tol:
            finite = False
        else:
            r = 2.0**-lo_slope
            total += shells[0] * r / (1 - r)
    if hi_slope is not None:
        if hi_slope >= -slope_tol:
            finite = False
        else:
            r = 2.0**hi_slope
            total += shells[-1] * r / (1 - r)
    return (True, total) if finite else (False, math.inf)


@dataclass
class LimitSpec:
    """Parameters of the limit field.

    ``hod(u)`` evaluates ``h(u)/(iu)^K`` for the limit transfer function ``h``;
    ``support`` is the time-domain support length of the limit wavelet (it
    sets the oscillation scale); ``alpha`` and ``C`` give the decay bound
    ``|h(u)| <= C |u|^{-alpha}`` used for tail truncation.
    """

    q: int
    d: float
    K: int
    hod: Callable
    support: float
    alpha: float
    C: float
    gamma_bar: Callable = field(default=lambda m: 2.0**m)
    checked: bool = False

    def __post_init__(self):
        _check_order(self.q, self.d)
        if self.K < 0:
            raise ValueError("K must be >= 0")
        if memory_param(self.d, self.q) + self.K <= 0:
            raise ValueError("need d(q) + K > 0")
        if not self.alpha > 0.5:
            raise ValueError("alpha must exceed 1/2")
        if not self.checked:
            finite, _ = membership_S(lambda u: self.hod(u) * (1j * u) ** self.K,
                                     self.q, self.d, self.K)
            if not finite:
                raise DivergenceError("limit wavelet is not in the admissible class")
            self.checked = True

    @classmethod
    def from_bank(cls, bank: FilterBank, q: int, d: float, K: int | None = None) -> "LimitSpec":
        """Spec driven by the limit transfer function of ``bank``."""
        K = bank.K if K is None else K
        if K > bank.M:
            raise ValueError(f"need M >= K, got M={bank.M}, K={K}")
        if bank.is_mra:
            support = float(bank.lowpass.size - 1)
        else:
            gJ = bank.gamma(bank.J)
            support = bank.support(bank.J) / gJ
        C = check_uniform_smoothness(bank)
        # admissibility follows from M >= K
        return cls(q, d, K, lambda u: bank.hinf_over_diff(u, K), support,
                   bank.alpha, C, checked=True)

    @property
    def dq(self) -> float:
        return memory_param(self.d, self.q)

    @property
    def H(self) -> float:
        return ss_exponent(self.q, self.d, self.K)

    @property
    def prefactor(self) -> float:
        return math.factorial(self.q) * gamma_factor(self.q, self.d)


@dataclass(frozen=True)
class LimitCov:
    """Covariance block over ``index`` (pairs ``(m, k)``) with error estimates."""

    index: tuple
    matrix: np.ndarray
    err: np.ndarray

    def correlation(self) -> np.ndarray:
        s = np.sqrt(np.diag(self.matrix))
        return self.matrix / np.outer(s, s)

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.matrix).min())

    def is_psd(self, tol: float = 1e-8) -> bool:
        return self.min_eigenvalue() >= -tol * float(np.trace(self.matrix))

    def to_csv(self, path, header_lines=()):
        with open(path, "w", newline="") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            wr = csv.writer(fh)
            wr.writerow(["m", "k", "mp", "kp", "cov", "err"])
            for a, (m, k) in enumerate(self.index):
                for b, (mp, kp) in enumerate(self.index):
                    wr.writerow([m, k, mp, kp, repr(float(self.matrix[a, b])),
                                 repr(float(self.err[a, b]))])


def _integrate_group(spec: LimitSpec, g1, g2, deltas, rtol, max_blocks):
    """``int_0^inf (g1 g2)^K hod(g1 s) conj hod(g2 s) e^{isD} s^{-2d(q)} ds`` for each ``D``.

    Returns ``(values, errors)``; the integrand is split into a
    Gauss-Jacobi panel at the origin and dyadic blocks of Gauss-Legendre
    panels, stopped by the decay bound.
    """
    deltas = np.asarray(deltas, dtype=float)
    rho = -2 * spec.dq
    omega = float(np.abs(deltas).max()) + spec.support * max(g1, g2) + 1e-12
    h = 4 * np.pi / omega
    scale = (g1 * g2) ** spec.K

    def prod(s):
        a = spec.hod(g1 * s)
        b = a if g1 == g2 else spec.hod(g2 * s)
        return scale * a * np.conj(b)

    def phase(s):
        return np.exp(1j * np.outer(deltas, s))

    # origin panel [0, h] with weight s^rho
    xs, ws = {}, {}
    for n in (_JAC_HI, _JAC_LO):
        x, w = _jacobi(n, 0.0, rho)
        xs[n], ws[n] = h * (1 + x) / 2, (h / 2) ** (rho + 1) * w
    s_all = np.concatenate([xs[_JAC_HI], xs[_JAC_LO]])
    p_all = prod(s_all)
    hiN = _JAC_HI
    vals_hi = phase(xs[hiN]) @ (ws[hiN] * p_all[:hiN])
    vals_lo = phase(xs[_JAC_LO]) @ (ws[_JAC_LO] * p_all[hiN:])
    value = vals_hi
    err = np.abs(vals_hi - vals_lo)
    mass = float(ws[hiN] @ np.abs(p_all[:hiN]))

    th, wh = np.polynomial.legendre.leggauss(_GL_HI)
    tl, wl = np.polynomial.legendre.leggauss(_GL_LO)
    e = rho - 2 * spec.alpha - 2 * spec.K
    tail_coef = spec.C**2 * (g1 * g2) ** (-spec.alpha) / (-e - 1)
    tail = math.inf
    for b in range(1, max_blocks + 1):
        lo, npan = 2.0 ** (b - 1) * h, 2 ** (b - 1)
        mid = lo + h * (np.arange(npan) + 0.5)
        sh = (mid[:, None] + (h / 2) * th).ravel()
        sl = (mid[:, None] + (h / 2) * tl).ravel()
        wgt_h = np.tile(wh * h / 2, npan) * sh**rho
        wgt_l = np.tile(wl * h / 2, npan) * sl**rho
        ph, pl = prod(sh), prod(sl)
        vh = phase(sh) @ (wgt_h * ph)
        vl = phase(sl) @ (wgt_l * pl)
        value = value + vh
        err = err + np.abs(vh - vl)
        mass += float(wgt_h @ np.abs(ph))
        tail = tail_coef * (2.0 * lo) ** (e + 1)
        if tail <= rtol * mass:
            break
    return value, err + tail


def _pair_cov(spec, g1, g2, deltas, rtol, max_blocks):
    v, e = _integrate_group(spec, g1, g2, deltas, rtol, max_blocks)
    pref = spec.prefactor * math.sqrt(g1 * g2) * 2.0
    return pref * v.real, pref * e


def limit_cov(spec: LimitSpec, mk, mk2, rtol: float = RTOL, max_blocks: int = MAX_BLOCKS):
    """``Cov(Y_{m,k}, Y_{m',k'})`` and its error estimate."""
    (m, k), (m2, k2) = mk, mk2
    g1, g2 = spec.gamma_bar(m), spec.gamma_bar(m2)
    v, e = _pair_cov(spec, g1, g2, [k * g1 - k2 * g2], rtol, max_blocks)
    return float(v[0]), float(e[0])


def limit_cov_block(spec: LimitSpec, index, rtol: float = RTOL,
                    max_blocks: int = MAX_BLOCKS) -> LimitCov:
    """Covariance matrix over the ``(m, k)`` pairs in ``index``.

    Pairs sharing the same ``(m, m')`` reuse one set of transfer-function
    evaluations.
    """
    index = tuple((int(m), int(k)) for m, k in index)
    n = len(index)
    mat, err = np.zeros((n, n)), np.zeros((n, n))
    groups = {}
    for a in range(n):
        for b in range(a, n):
            m, m2 = index[a][0], index[b][0]
            groups.setdefault((m, m2), []).append((a, b))
    for (m, m2), pairs in groups.items():
        g1, g2 = spec.gamma_bar(m), spec.gamma_bar(m2)
        deltas = [index[a][1] * g1 - index[b][1] * g2 for a, b in pairs]
        uniq, inv = np.unique(np.asarray(deltas, dtype=float), return_inverse=True)
        v, e = _pair_cov(spec, g1, g2, uniq, rtol, max_blocks)
        for (a, b), i in zip(pairs, inv.ravel()):
            mat[a, b] = mat[b, a] = v[i]
            err[a, b] = err[b, a] = e[i]
    return LimitCov(index, mat, err)
