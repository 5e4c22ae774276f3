"""Exact-in-law synthesis of the Gaussian input and of ``Y`` with ``Delta^K Y = G(X)``."""
from __future__ import annotations

import csv
import json
import logging
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from .hermite import HermiteExpansion, builtin_filter, subordinate
from .spectra import MemoryModel, NormalizationWarning, autocovariance, farima

__all__ = [
    "SynthesisError",
    "PathConfig",
    "rng_for",
    "circulant_eigenvalues",
    "synth_gaussian",
    "integrate_K",
    "difference_K",
    "sample_path",
    "write_series_csv",
    "load_path_config",
]

log = logging.getLogger(__name__)

MAX_ENLARGEMENT = 2**5
NEG_TOL = 1e-8


class SynthesisError(RuntimeError):
    pass


def rng_for(seed: int, replicate: int) -> np.random.Generator:
    """Philox stream keyed by ``(seed, replicate)``; no global state involved."""
    ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=(int(replicate),))
    return np.random.Generator(np.random.Philox(ss))


def _embedding_eigs(model, n):
    m = 2 * n
    while True:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", NormalizationWarning)
            r = autocovariance(model, m)
        row = np.concatenate([r, r[-2:0:-1]])
        eigs = np.fft.rfft(row).real
        if eigs.min() >= -NEG_TOL * eigs.max() or m >= MAX_ENLARGEMENT * n:
            break
        m *= 2
    if eigs.min() < -NEG_TOL * eigs.max():
        raise SynthesisError(
            f"circulant embedding not non-negative after enlargement to m={m} "
            f"(min eigenvalue {eigs.min():.3e})")
    if eigs.min() < 0:
        log.warning("clipping %d tiny negative embedding eigenvalues", int((eigs < 0).sum()))
        eigs = np.clip(eigs, 0.0, None)
    return eigs, 2 * m


@lru_cache(maxsize=16)
def _cached_eigs(model, n):
    eigs, size = _embedding_eigs(model, n)
    eigs.setflags(write=False)
    return eigs, size


def circulant_eigenvalues(model: MemoryModel, n: int):
    """Eigenvalues (rfft half) of the circulant embedding and its size."""
    return _cached_eigs(model, n)


def synth_gaussian(model: MemoryModel, n: int, seed: int = 0, replicate: int = 0) -> np.ndarray:
    """Stationary Gaussian sample of length ``n`` with autocovariance ``r``.

    Circulant embedding: with ``L = 2m`` and eigenvalues ``e_k`` of the
    circulant built on ``r(0..m)``, ``Re FFT(sqrt(e/L) Z)`` has covariance
    ``r`` exactly for complex standard ``Z``.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    eigs, size = circulant_eigenvalues(model, n)
    full = np.concatenate([eigs, eigs[-2:0:-1]])
    rng = rng_for(seed, replicate)
    z = rng.standard_normal(size) + 1j * rng.standard_normal(size)
    x = np.fft.fft(np.sqrt(full / size) * z)
    return x.real[:n].copy()


def integrate_K(series, K: int) -> np.ndarray:
    """K-fold cumulative sum with zero initial conditions."""
    if K < 0:
        raise ValueError("K must be >= 0")
    y = np.asarray(series, dtype=float)
    for _ in range(K):
        y = np.cumsum(y)
    return y if K else y.copy()


def difference_K(series, K: int) -> np.ndarray:
    """Inverse of :func:`integrate_K` (backward difference with a zero pre-sample)."""
    y = np.asarray(series, dtype=float)
    for _ in range(K):
        y = np.diff(y, prepend=0.0)
    return y


@dataclass(frozen=True)
class PathConfig:
    model: MemoryModel
    G: Callable | HermiteExpansion
    K: int = 0
    n: int = 2**14
    seed: int = 0
    replicate: int = 0
    G_name: str = field(default="custom", compare=False)

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("n must be >= 2")
        if self.K < 0:
            raise ValueError("K must be >= 0")

    def with_replicate(self, replicate: int) -> "PathConfig":
        return PathConfig(self.model, self.G, self.K, self.n, self.seed, replicate, self.G_name)


def sample_path(cfg: PathConfig):
    """Return ``(X, Y)`` for one replicate."""
    x = synth_gaussian(cfg.model, cfg.n, cfg.seed, cfg.replicate)
    y = integrate_K(subordinate(cfg.G, x), cfg.K)
    return x, y


def write_series_csv(path, x, y, header_lines=()):
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        w = csv.writer(fh)
        w.writerow(["index", "x", "y"])
        for i, (a, b) in enumerate(zip(x, y)):
            w.writerow([i, repr(float(a)), repr(float(b))])


_CONFIG_KEYS = {"d", "fstar", "G", "K", "n", "seed", "replicates"}


def load_path_config(path):
    """Read ``{d, fstar, G, K, n, seed, replicates}`` JSON; returns ``(cfg, replicates)``."""
    with open(path) as fh:
        obj = json.load(fh)
    unknown = set(obj) - _CONFIG_KEYS
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    if obj.get("fstar", "farima") != "farima":
        raise ValueError("only fstar='farima' is supported in config files")
    g_name = obj.get("G", "identity")
    cfg = PathConfig(farima(float(obj["d"])), builtin_filter(g_name), int(obj.get("K", 0)),
                     int(obj.get("n", 2**14)), int(obj.get("seed", 0)), 0, g_name)
    return cfg, int(obj.get("replicates", 1))
