"""Wavelet coefficients ``W_{j,k} = sum_l h_j(gamma_j k - l) Y_l`` on interior indices."""
from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.signal import fftconvolve

from .filters import FilterBank

__all__ = [
    "CoeffMatrix",
    "EmptyLevelWarning",
    "filter_coefficients",
    "coeffs_from_path",
    "coeffs_from_stationary",
]

DIRECT_LIMIT = 2**24


class EmptyLevelWarning(UserWarning):
    pass


@dataclass(frozen=True)
class CoeffMatrix:
    """Per-level ``(k, w)`` arrays; only fully supported shifts ``k`` are kept."""

    levels: dict
    gammas: dict

    @property
    def scales(self):
        return sorted(self.levels)

    def k(self, j):
        return self.levels[j][0]

    def w(self, j):
        return self.levels[j][1]

    def count(self, j) -> int:
        return int(self.levels[j][1].size)

    def summary(self):
        out = []
        for j in self.scales:
            w = self.w(j)
            out.append({"j": j, "gamma": self.gammas[j], "count": int(w.size),
                        "mean": float(w.mean()), "var": float(w.var())})
        return out

    def to_csv(self, path, header_lines=()):
        with open(path, "w", newline="") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            wr = csv.writer(fh)
            wr.writerow(["j", "k", "w"])
            for j in self.scales:
                for k, w in zip(*self.levels[j]):
                    wr.writerow([j, int(k), repr(float(w))])

    def summary_json(self) -> str:
        return json.dumps(self.summary(), sort_keys=True)


def _valid_k(n, gamma, offset, support):
    # need 0 <= gamma k - offset - i <= n-1 for all 0 <= i < support
    lo = math.ceil((offset + support - 1) / gamma)
    hi = math.floor((n - 1 + offset) / gamma)
    return np.arange(lo, hi + 1) if hi >= lo else np.arange(0)


def filter_coefficients(taps, offset: int, gamma: int, series, method: str = "auto"):
    """Interior ``(k, w)`` for one filter; ``method`` is ``direct``, ``fft`` or ``auto``."""
    taps = np.asarray(taps, dtype=float)
    y = np.asarray(series, dtype=float)
    S = taps.size
    k = _valid_k(y.size, gamma, offset, S)
    if k.size == 0:
        return k, np.zeros(0)
    # window start for shift k is t0 = gamma k - offset - (S - 1)
    starts = gamma * k - offset - (S - 1)
    if method == "auto":
        method = "direct" if S * k.size < DIRECT_LIMIT else "fft"
    if method == "direct":
        windows = sliding_window_view(y, S)[starts]
        w = windows @ taps[::-1]
    elif method == "fft":
        full = fftconvolve(y, taps, mode="full")
        w = full[gamma * k - offset]
    else:
        raise ValueError(f"unknown method {method!r}")
    return k, w


def _transform(bank, series, j_range, factored, method):
    levels, gammas = {}, {}
    for j in j_range:
        taps, off = bank.factored(j) if factored else bank.level(j)
        g = int(bank.gamma(j))
        k, w = filter_coefficients(taps, off, g, series, method)
        if k.size == 0:
            warnings.warn(f"level {j} has no fully supported coefficient; omitted",
                          EmptyLevelWarning, stacklevel=3)
            continue
        levels[j] = (k, w)
        gammas[j] = g
    return CoeffMatrix(levels, gammas)


def coeffs_from_path(bank: FilterBank, y, j_range=None, method: str = "auto") -> CoeffMatrix:
    """Coefficients of the (possibly non-stationary) path ``Y`` with taps ``h_j``."""
    j_range = range(1, bank.J + 1) if j_range is None else j_range
    return _transform(bank, y, j_range, False, method)


def coeffs_from_stationary(bank: FilterBank, g_series, j_range=None,
                           method: str = "auto") -> CoeffMatrix:
    """Same coefficients computed from ``G(X)`` with the factored taps ``h_j^(K)``."""
    if bank.K > bank.M:
        raise ValueError("bank.K exceeds its vanishing moments")
    j_range = range(1, bank.J + 1) if j_range is None else j_range
    return _transform(bank, g_series, j_range, True, method)
