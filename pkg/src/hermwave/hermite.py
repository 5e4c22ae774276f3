"""Probabilists' Hermite polynomials and chaos expansions of centered filters G."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from numpy.polynomial import hermite_e

__all__ = [
    "HermiteExpansion",
    "NotCenteredError",
    "hermite_eval",
    "gauss_nodes",
    "hermite_coeffs",
    "subordinate",
    "builtin_filter",
    "BUILTIN_FILTERS",
]

DEFAULT_NODES = 200
DEFAULT_ORDER = 25
RANK_TOL = 1e-10


class NotCenteredError(ValueError):
    pass


def hermite_eval(q: int, x):
    """``H_q(x)`` via ``H_{q+1} = x H_q - q H_{q-1}``."""
    if q < 0:
        raise ValueError("q must be non-negative")
    x = np.asarray(x, dtype=float)
    prev, cur = np.ones_like(x), x.copy()
    if q == 0:
        return prev if prev.ndim else float(prev)
    for k in range(1, q):
        prev, cur = cur, x * cur - k * prev
    return cur if cur.ndim else float(cur)


def _hermite_table(Q, x):
    # rows H_0..H_Q evaluated at x
    out = np.empty((Q + 1, x.size))
    out[0] = 1.0
    if Q >= 1:
        out[1] = x
    for k in range(1, Q):
        out[k + 1] = x * out[k] - k * out[k - 1]
    return out


@lru_cache(maxsize=8)
def gauss_nodes(nodes: int = DEFAULT_NODES):
    """Nodes and weights for ``E[g(X)]``, ``X ~ N(0, 1)``."""
    x, w = hermite_e.hermegauss(nodes)
    w = w / math.sqrt(2 * math.pi)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@dataclass(frozen=True)
class HermiteExpansion:
    """Chaos coefficients ``c_q = E[G(X) H_q(X)]`` for ``q = 1..Q``.

    ``G(X) = sum_q c_q / q! H_q(X)``; ``l2`` is the truncated ``E[G(X)^2]``.
    """

    coeffs: tuple
    rank: int
    l2: float
    tail: float = 0.0
    name: str = "custom"

    @property
    def Q(self) -> int:
        return len(self.coeffs)

    def c(self, q: int) -> float:
        return self.coeffs[q - 1] if 1 <= q <= self.Q else 0.0

    def to_json(self) -> str:
        return json.dumps({"rank": self.rank, "coeffs": list(self.coeffs), "l2": self.l2})

    @classmethod
    def from_json(cls, text: str) -> "HermiteExpansion":
        obj = json.loads(text)
        return cls(tuple(float(c) for c in obj["coeffs"]), int(obj["rank"]), float(obj["l2"]))

    def __call__(self, x):
        return subordinate(self, x)


def _rank(coeffs, tol):
    c = np.abs(np.asarray(coeffs))
    if c.max() == 0:
        raise ValueError("G has no non-zero Hermite coefficient")
    nz = np.nonzero(c >= tol * c.max())[0]
    return int(nz[0]) + 1


def hermite_coeffs(G: Callable, Q: int = DEFAULT_ORDER, nodes: int = DEFAULT_NODES,
                   tol: float = RANK_TOL, center_tol: float = 1e-8,
                   name: str = "custom") -> HermiteExpansion:
    """Gauss-Hermite estimate of ``c_1..c_Q`` and the Hermite rank of ``G``.

    Raises :class:`NotCenteredError` when ``E[G(X)]`` is not zero.
    """
    if Q < 1:
        raise ValueError("Q must be >= 1")
    x, w = gauss_nodes(nodes)
    gx = np.asarray(G(x), dtype=float)
    table = _hermite_table(Q, x)
    c = table @ (w * gx)
    scale = math.sqrt(float(w @ gx**2)) or 1.0
    if abs(c[0]) > center_tol * scale:
        raise NotCenteredError(f"G is not centered: E[G(X)] = {c[0]:.3e}")
    coeffs = c[1:]
    fact = np.array([math.factorial(q) for q in range(1, Q + 1)], dtype=float)
    # compare on the orthonormal scale c_q / sqrt(q!): raw high-order
    # coefficients carry roundoff proportional to the size of H_q
    unit = np.abs(coeffs) / np.sqrt(fact)
    coeffs = np.where(unit < tol * unit.max(), 0.0, coeffs)
    terms = coeffs**2 / fact
    return HermiteExpansion(tuple(float(v) for v in coeffs), _rank(coeffs / np.sqrt(fact), tol),
                            float(math.fsum(terms)), float(terms[-1]), name)


def subordinate(G, x_series):
    """Apply ``G`` pointwise; an expansion is evaluated as its truncated chaos sum."""
    x = np.asarray(x_series, dtype=float)
    if isinstance(G, HermiteExpansion):
        a = np.array(G.coeffs) / np.array([math.factorial(q) for q in range(1, G.Q + 1)])
        # hermeval uses H_0..H_Q coefficient order
        return hermite_e.hermeval(x, np.r_[0.0, a])
    return np.asarray(G(x), dtype=float)


_SQRT_E = math.exp(0.5)

BUILTIN_FILTERS = {
    "identity": lambda x: np.asarray(x, dtype=float),
    "cube": lambda x: np.asarray(x, dtype=float) ** 3,
    "exp": lambda x: np.exp(x) - _SQRT_E,
}


def builtin_filter(name: str) -> Callable:
    """Named filters: ``identity``, ``cube``, ``exp`` (centered), ``H<q>``."""
    if name in BUILTIN_FILTERS:
        return BUILTIN_FILTERS[name]
    if name.startswith("H") and name[1:].isdigit() and int(name[1:]) >= 1:
        q = int(name[1:])
        return lambda x: hermite_eval(q, x)
    raise ValueError(f"unknown filter {name!r}; expected identity, cube, exp or H<q>")
