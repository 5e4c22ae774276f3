"""Wavelet filter banks ``{h_j, gamma_j}``: construction, moments, K-factorization, limits.

Taps are stored with an integer ``offset``: ``h_j(offset + i) = taps[i]``.
For multiresolution banks the level-j transfer function is the non-decimated
cascade ``h(2^{j-1} lam) * prod_{l<j-1} g(2^l lam)``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

__all__ = [
    "LOWPASS",
    "FAMILY_ALPHA",
    "FilterBank",
    "FilterConvergenceWarning",
    "mirror_highpass",
    "build_mra_bank",
    "bank_from_taps",
    "dft_filter",
    "vanishing_moments",
    "factor_K",
    "uniform_smoothness_profile",
    "check_uniform_smoothness",
    "limit_transfer",
    "cascade_transfer",
    "read_bank",
    "write_bank",
    "write_transfer_csv",
]

_S3 = math.sqrt(3.0)

LOWPASS = {
    "haar": np.array([1.0, 1.0]) / math.sqrt(2.0),
    "db2": np.array([1 + _S3, 3 + _S3, 3 - _S3, 1 - _S3]) / (4 * math.sqrt(2.0)),
    "db3": np.array([0.3326705529500826, 0.8068915093110925, 0.4598775021184915,
                     -0.1350110200102545, -0.0854412738820267, 0.0352262918857095]),
}
# decay exponent of the limit wavelet's Fourier transform (lower bounds)
FAMILY_ALPHA = {"haar": 1.0, "db2": 1.2, "db3": 1.3}

FREQ_GRID = 2**18
TAP_THRESHOLD = 1e-12
MOMENT_TOL = 1e-6
_TAIL_SWITCH = 0.05
_TAIL_TERMS = 10


class FilterConvergenceWarning(UserWarning):
    pass


def dft_filter(taps, lam, offset: int = 0):
    """``sum_tau h(tau) exp(-i lam tau)`` (exact finite sum)."""
    taps = np.asarray(taps, dtype=float)
    lam = np.asarray(lam, dtype=float)
    flat = lam.reshape(-1)
    if taps.size <= 64:
        z = np.exp(-1j * flat)
        out = np.polyval(taps[::-1], z)
        if offset:
            out = out * np.exp(-1j * offset * flat)
        out = out.reshape(lam.shape)
        return out if out.ndim else complex(out)
    tau = offset + np.arange(taps.size)
    out = np.empty(flat.size, dtype=complex)
    chunk = max(1, 2**22 // max(taps.size, 1))
    for s in range(0, flat.size, chunk):
        out[s:s + chunk] = np.exp(-1j * np.outer(flat[s:s + chunk], tau)) @ taps
    out = out.reshape(lam.shape)
    return out if out.ndim else complex(out)


def vanishing_moments(taps, offset: int = 0, tol: float = MOMENT_TOL) -> int:
    """Largest ``M`` with ``sum h(l) l^m`` negligible for ``m < M``."""
    taps = np.asarray(taps, dtype=float)
    if taps.size == 0 or not np.any(taps):
        raise ValueError("degenerate filter: all taps are zero")
    ell = (offset + np.arange(taps.size)).astype(float)
    M = 0
    while M < taps.size:
        powers = ell**M
        if abs(taps @ powers) > tol * (np.abs(taps) @ np.abs(powers)):
            break
        M += 1
    return M


def factor_K(taps, K: int, offset: int = 0, moments: int | None = None):
    """Taps of ``h^(K)`` with ``h_hat = (1 - e^{-i lam})^K h^(K)_hat``.

    Each factor is a cumulative sum whose last partial sum must vanish.
    """
    taps = np.asarray(taps, dtype=float)
    if K < 0:
        raise ValueError("K must be >= 0")
    M = vanishing_moments(taps, offset) if moments is None else moments
    if K > M:
        raise ValueError(f"cannot factor K={K} differences out of a filter with M={M}")
    scale = np.abs(taps).sum()
    out = taps.copy()
    for _ in range(K):
        out = np.cumsum(out)
        if abs(out[-1]) > 1e-10 * scale:
            raise ValueError("trailing partial sum does not vanish; support is not finite")
        out = out[:-1]
    return out


def mirror_highpass(lowpass) -> np.ndarray:
    """``h(l) = (-1)^l g(L-1-l)``."""
    g = np.asarray(lowpass, dtype=float)
    return ((-1.0) ** np.arange(g.size)) * g[::-1]


def _diff_factor(w, K):
    # (1 - e^{-iw})^K computed without cancellation near 0
    return (2j * np.sin(w / 2) * np.exp(-0.5j * w)) ** K


@dataclass
class FilterBank:
    """Filters ``h_1..h_J`` with scale factors ``gamma_j = 2^j``.

    Either ``lowpass`` is given (a multiresolution bank, taps materialized on
    demand) or ``level_taps`` lists explicit ``(taps, offset)`` per level.
    """

    J: int
    K: int = 0
    alpha: float = 1.0
    lowpass: np.ndarray | None = None
    level_taps: list | None = None
    family: str = "custom"
    M_declared: int | None = None
    freq_grid: int = FREQ_GRID
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.J < 1:
            raise ValueError("J must be >= 1")
        if (self.lowpass is None) == (self.level_taps is None):
            raise ValueError("give exactly one of lowpass or level_taps")
        if self.level_taps is not None and len(self.level_taps) < self.J:
            raise ValueError("fewer explicit levels than J")
        if not self.alpha > 0.5:
            raise ValueError("alpha must exceed 1/2")
        if self.K > self.M:
            raise ValueError(f"need M >= K, got M={self.M}, K={self.K}")

    @property
    def is_mra(self) -> bool:
        return self.lowpass is not None

    def gamma(self, j: int) -> float:
        return float(2**j)

    @staticmethod
    def gamma_bar(m: int) -> float:
        return float(2.0**m)

    @cached_property
    def highpass(self) -> np.ndarray:
        return mirror_highpass(self.lowpass)

    @cached_property
    def _highpass_factored(self):
        M0 = vanishing_moments(self.highpass)
        return M0, factor_K(self.highpass, M0, moments=M0)

    @cached_property
    def M(self) -> int:
        if self.M_declared is not None:
            return self.M_declared
        if self.is_mra:
            return self._highpass_factored[0]
        return min(vanishing_moments(t, o) for t, o in self.level_taps[: self.J])

    def highpass_dft(self, w):
        M0, hk = self._highpass_factored
        return _diff_factor(w, M0) * dft_filter(hk, w)

    def transfer(self, j: int, lam):
        """``h_j_hat(lam)``."""
        lam = np.asarray(lam, dtype=float)
        if not self.is_mra:
            taps, off = self.level(j)
            return dft_filter(taps, lam, off)
        out = self.highpass_dft(2.0 ** (j - 1) * lam)
        for l in range(j - 1):
            out = out * dft_filter(self.lowpass, 2.0**l * lam)
        return out

    def level(self, j: int):
        """``(taps, offset)`` of level ``j``."""
        j = int(j)
        if not 1 <= j <= self.J:
            raise ValueError(f"level {j} outside 1..{self.J}")
        if not self.is_mra:
            taps, off = self.level_taps[j - 1]
            return np.asarray(taps, dtype=float), int(off)
        if j not in self._cache:
            self._cache[j] = (self._mra_taps(j), 0)
        return self._cache[j]

    def _mra_taps(self, j):
        L = self.lowpass.size
        support = (2**j - 1) * (L - 1) + 1
        n = max(self.freq_grid, 1 << (2 * support - 1).bit_length())
        lam = 2 * np.pi * np.arange(n) / n
        spec = self.highpass_dft(2.0 ** (j - 1) * lam)
        for l in range(j - 1):
            w = 2.0**l * lam
            spec = spec * np.polyval(self.lowpass[::-1], np.exp(-1j * w))
        taps = np.fft.ifft(spec).real
        if np.abs(taps[support:]).max() > 1e-9 * np.abs(taps).max():
            raise RuntimeError("transfer product has taps beyond the support bound")
        taps = taps[:support]
        taps[np.abs(taps) < TAP_THRESHOLD * np.abs(taps).max()] = 0.0
        return taps

    def factored(self, j: int, K: int | None = None):
        """``(h_j^(K) taps, offset)``; defaults to the bank's ``K``."""
        K = self.K if K is None else K
        key = ("K", int(j), K)
        if key not in self._cache:
            taps, off = self.level(j)
            self._cache[key] = (factor_K(taps, K, off, moments=self.M), off)
        return self._cache[key]

    def support(self, j: int) -> int:
        taps, _ = self.level(j)
        nz = np.nonzero(taps)[0]
        return int(nz[-1] - nz[0] + 1)

    def hinf(self, lam, depth: int = 40):
        """Limit transfer function ``h_inf_hat``."""
        if self.is_mra:
            return cascade_transfer(self, lam, depth)
        gJ = self.gamma(self.J)
        return self.transfer(self.J, np.asarray(lam, dtype=float) / gJ) / math.sqrt(gJ)

    def hinf_over_diff(self, lam, K: int, depth: int = 40):
        """``h_inf_hat(lam) / (i lam)^K`` evaluated without cancellation."""
        lam = np.asarray(lam, dtype=float)
        if not self.is_mra or K == 0:
            with np.errstate(divide="ignore", invalid="ignore"):
                return self.hinf(lam, depth) / (1j * lam) ** K
        M0, hk = self._highpass_factored
        if K > M0:
            raise ValueError("K exceeds the vanishing moments")
        w = lam / 2
        # (1 - e^{-iw})^K / (i lam)^K = (sin(w/2)/(w/2) e^{-iw/2} / 2)^K
        ratio = (np.sinc(w / (2 * np.pi)) * np.exp(-0.5j * w) / 2.0) ** K
        out = ratio * _diff_factor(w, M0 - K) * dft_filter(hk, w) / math.sqrt(2.0)
        return out * self.lowpass_cascade(lam, depth)

    @cached_property
    def _log_lowpass_series(self):
        # log(g_hat(w)/sqrt2) = sum_n c_n (-i w)^n, from the moments of g/sqrt2
        p = self.lowpass / math.sqrt(2.0)
        k = np.arange(p.size, dtype=float)
        nmax = _TAIL_TERMS
        a = np.array([p @ k**n / math.factorial(n) for n in range(nmax + 1)])
        c = np.zeros(nmax + 1)
        for n in range(1, nmax + 1):
            c[n] = a[n] - sum(j * c[j] * a[n - j] for j in range(1, n)) / n
        return c

    def lowpass_cascade(self, lam, depth: int = 40, start: int = 2):
        """``prod_{i=start}^{depth} g_hat(lam/2^i)/sqrt2``.

        Factors with ``|lam/2^i| <= 0.05`` are summed in log form using the
        power series of ``log g_hat``.  The remaining phases are obtained by
        repeated squaring of ``exp(-i lam/2^I)`` from each point's deepest
        active level ``I``.
        """
        lam = np.asarray(lam, dtype=float)
        flat = lam.reshape(-1)
        mag = np.abs(flat)
        with np.errstate(divide="ignore"):
            top = np.floor(np.log2(mag / _TAIL_SWITCH))
        top = np.nan_to_num(top, neginf=start - 1.0)
        # float rounding at exact powers of two
        top = np.where(np.ldexp(mag, -top.clip(-1000, 1000).astype(int)) > _TAIL_SWITCH,
                       top, top - 1)
        top = np.clip(top, start - 1, depth).astype(int)
        g = self.lowpass[::-1] / math.sqrt(2.0)
        order = np.argsort(top, kind="stable")
        ts, us = top[order], flat[order]
        prod = np.ones(flat.size, dtype=complex)
        hi = int(ts[-1]) if flat.size else start - 1
        if hi >= start:
            first = int(np.searchsorted(ts, start))
            z = np.exp(-1j * np.ldexp(us[first:], -ts[first:]))
            z0 = z.copy()
            for i in range(hi, start - 1, -1):
                a = int(np.searchsorted(ts, i)) - first
                b = int(np.searchsorted(ts, i + 1)) - first
                # levels above the point's own top are squared down from z0
                z[b:] *= z[b:]
                z[a:b] = z0[a:b]
                prod[first + a:] *= np.polyval(g, z[a:])
        out = np.empty(flat.size, dtype=complex)
        out[order] = prod
        # log-series tail over levels top+1..depth
        count = depth - top
        w0 = np.ldexp(flat, -(top + 1))
        c = self._log_lowpass_series
        logsum = np.zeros(flat.size, dtype=complex)
        term = np.ones(flat.size, dtype=complex)
        for n in range(1, c.size):
            term = term * (-1j * w0)
            geo = (1 - np.ldexp(1.0, -n * count)) / (1 - 2.0**-n)
            logsum += c[n] * term * geo
        out *= np.exp(logsum)
        return out.reshape(lam.shape)


def cascade_transfer(bank: FilterBank, lam, depth: int = 25):
    """``2^{-1/2} h(lam/2) prod_{i=2}^{depth} g(lam/2^i)/sqrt2`` (truncated psi_hat)."""
    lam = np.asarray(lam, dtype=float)
    return bank.highpass_dft(lam / 2) / math.sqrt(2.0) * bank.lowpass_cascade(lam, depth)


def build_mra_bank(lowpass, J: int, K: int = 0, alpha: float | None = None,
                   family: str = "custom") -> FilterBank:
    """Multiresolution bank from a conjugate-mirror lowpass filter."""
    if isinstance(lowpass, str):
        family = lowpass
        lowpass = LOWPASS[lowpass]
    g = np.asarray(lowpass, dtype=float)
    if abs(g.sum() - math.sqrt(2.0)) > 1e-8:
        raise ValueError(f"lowpass must satisfy g_hat(0)=sqrt(2); got {g.sum():.10f}")
    if alpha is None:
        alpha = FAMILY_ALPHA.get(family, 1.0)
    return FilterBank(J=J, K=K, alpha=alpha, lowpass=g, family=family)


def bank_from_taps(levels, K: int = 0, alpha: float = 1.0, M: int | None = None) -> FilterBank:
    """Bank from explicit ``[(taps, offset), ...]`` for ``j = 1..J``."""
    levels = [(np.asarray(t, dtype=float), int(o)) for t, o in levels]
    return FilterBank(J=len(levels), K=K, alpha=alpha, level_taps=levels, M_declared=M)


def uniform_smoothness_profile(bank: FilterBank, lam_grid=None) -> np.ndarray:
    """Per-level sup of ``|h_j_hat| (1+g|lam|)^{M+alpha} / (g^{1/2} |g lam|^M)``."""
    if lam_grid is None:
        lam_grid = np.pi * np.geomspace(1e-6, 1.0, 4000)
    lam = np.asarray(lam_grid, dtype=float)
    lam = lam[lam != 0]
    M, a = bank.M, bank.alpha
    out = []
    for j in range(1, bank.J + 1):
        g = bank.gamma(j)
        x = g * np.abs(lam)
        ratio = np.abs(bank.transfer(j, lam)) * (1 + x) ** (M + a) / (math.sqrt(g) * x**M)
        out.append(ratio.max())
    return np.array(out)


def check_uniform_smoothness(bank: FilterBank, lam_grid=None) -> float:
    """Estimated constant ``C`` of the uniform smoothness bound (sup over levels)."""
    return float(uniform_smoothness_profile(bank, lam_grid).max())


def limit_transfer(bank: FilterBank, lam, depth: int = 25, tol: float = 1e-2):
    """Rescaled last level ``gamma_J^{-1/2} h_J_hat(lam/gamma_J)``.

    For multiresolution banks the truncated cascade product is returned as
    well; a :class:`FilterConvergenceWarning` flags a sup difference above
    ``tol``.  Returns ``(discrete, cascade_or_None)``.
    """
    lam = np.asarray(lam, dtype=float)
    gJ = bank.gamma(bank.J)
    discrete = bank.transfer(bank.J, lam / gJ) / math.sqrt(gJ)
    if not bank.is_mra:
        return discrete, None
    cascade = cascade_transfer(bank, lam, depth)
    diff = np.max(np.abs(discrete - cascade)) if lam.size else 0.0
    if diff > tol:
        warnings.warn(f"level J={bank.J} differs from the limit by {diff:.3e}",
                      FilterConvergenceWarning, stacklevel=2)
    return discrete, cascade


def write_bank(bank: FilterBank, path, header=()):
    """Plain-text bank file: ``K M alpha J``, ``gamma_rule=pow2``, then levels.

    ``header`` lines are written first as ``#`` comments.
    """
    with open(path, "w") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        fh.write(f"{bank.K} {bank.M} {bank.alpha!r} {bank.J}\n")
        fh.write("gamma_rule=pow2\n")
        for j in range(1, bank.J + 1):
            taps, off = bank.level(j)
            fh.write(" ".join([str(j), str(off)] + [repr(float(t)) for t in taps]) + "\n")


def read_bank(path) -> FilterBank:
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
    K, M, alpha, J = lines[0].split()
    if lines[1] != "gamma_rule=pow2":
        raise ValueError(f"unsupported gamma rule: {lines[1]}")
    levels = {}
    for ln in lines[2:]:
        parts = ln.split()
        levels[int(parts[0])] = (np.array([float(v) for v in parts[2:]]), int(parts[1]))
    J = int(J)
    if sorted(levels) != list(range(1, J + 1)):
        raise ValueError("bank file must list levels 1..J")
    return bank_from_taps([levels[j] for j in range(1, J + 1)], int(K), float(alpha), int(M))


def write_transfer_csv(bank: FilterBank, path, lam_grid=None, header=()):
    """CSV ``j,lambda,abs_h`` of ``|h_j_hat|`` for plotting."""
    if lam_grid is None:
        lam_grid = np.linspace(0, np.pi, 513)
    with open(path, "w") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        fh.write("j,lambda,abs_h\n")
        for j in range(1, bank.J + 1):
            vals = np.abs(bank.transfer(j, lam_grid))
            for lam, v in zip(lam_grid, vals):
                fh.write(f"{j},{float(lam)!r},{float(v)!r}\n")
