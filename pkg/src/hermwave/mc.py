"""Monte Carlo checks of wavelet-variance scaling, Gaussianity and limit covariances."""
from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .filters import FilterBank
from .hermite import HermiteExpansion, hermite_coeffs
from .limit import LimitSpec, limit_cov_block, theorem_normalization
from .spectra import critical_order, memory_param
from .synth import PathConfig, rng_for, sample_path
from .transform import CoeffMatrix, coeffs_from_path

__all__ = [
    "ScalingReport",
    "MomentTable",
    "collect_moments",
    "scaling_experiment",
    "short_range_experiment",
    "gaussianity_check",
    "gaussianity_from_moments",
    "estimate_memory",
    "limit_cov_comparison",
    "wls_slope",
    "REGIME_TABLE",
    "DEFAULT_J_RANGE",
]

MIN_COEFFS = 30
# fitted scale range at n = 2^17; finer scales carry visible finite-scale bias
DEFAULT_J_RANGE = (6, 10)
BOOTSTRAP = 1000
# bootstrap streams live on replicate indices far above any simulated one
_BOOT_STREAM = 2**62


@dataclass(frozen=True)
class MomentTable:
    """Per-replicate, per-scale power sums ``count, sum w^2, sum w^3, sum w^4``."""

    js: tuple
    gammas: tuple
    counts: np.ndarray  # (replicates, scales)
    s2: np.ndarray
    s3: np.ndarray
    s4: np.ndarray

    @property
    def replicates(self) -> int:
        return self.s2.shape[0]

    def variances(self) -> np.ndarray:
        """Per-replicate mean of ``W^2`` (coefficients have mean zero)."""
        return self.s2 / self.counts

    def restrict(self, j_range) -> "MomentTable":
        """Sub-table holding only the scales in ``j_range``."""
        cols = [self.js.index(int(j)) for j in j_range]
        return MomentTable(tuple(self.js[c] for c in cols), tuple(self.gammas[c] for c in cols),
                           self.counts[:, cols], self.s2[:, cols], self.s3[:, cols],
                           self.s4[:, cols])


def _moments(w):
    w2 = w * w
    return w.size, math.fsum(w2), math.fsum(w2 * w), math.fsum(w2 * w2)


def collect_moments(cfg: PathConfig, bank: FilterBank, j_range, replicates: int,
                    keep=None):
    """Simulate ``replicates`` paths and tabulate coefficient power sums.

    ``keep`` is an optional set of scales whose raw coefficients are also
    returned (as a list of per-replicate :class:`CoeffMatrix`).
    """
    js = tuple(int(j) for j in j_range)
    R = int(replicates)
    if R < 2:
        raise ValueError("need at least 2 replicates")
    counts = np.zeros((R, len(js)))
    s2, s3, s4 = np.zeros_like(counts), np.zeros_like(counts), np.zeros_like(counts)
    kept = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for r in range(R):
            _, y = sample_path(cfg.with_replicate(r))
            cm = coeffs_from_path(bank, y, js)
            for i, j in enumerate(js):
                if j in cm.levels:
                    counts[r, i], s2[r, i], s3[r, i], s4[r, i] = _moments(cm.w(j))
            if keep:
                kept.append(CoeffMatrix({j: cm.levels[j] for j in keep if j in cm.levels},
                                        {j: cm.gammas[j] for j in keep if j in cm.gammas}))
    gammas = tuple(int(bank.gamma(j)) for j in js)
    table = MomentTable(js, gammas, counts, s2, s3, s4)
    return (table, kept) if keep else table


def wls_slope(x, y, w):
    """Weighted least-squares slope and intercept of ``y`` against ``x``."""
    x, y, w = (np.asarray(v, dtype=float) for v in (x, y, w))
    W = w.sum()
    xm, ym = (w @ x) / W, (w @ y) / W
    slope = (w @ ((x - xm) * (y - ym))) / (w @ (x - xm) ** 2)
    return float(slope), float(ym - slope * xm)


def _pooled_logvar(V):
    # V: (replicates, scales); pooled variance per scale and log2 weights
    R = V.shape[0]
    mean = np.array([math.fsum(c) for c in V.T]) / R
    se = V.std(axis=0, ddof=1) / math.sqrt(R)
    var_log = (se / (mean * math.log(2))) ** 2
    return mean, se, 1.0 / var_log


def _bootstrap_indices(seed, R, B):
    rng = rng_for(seed, _BOOT_STREAM)
    return rng.integers(0, R, size=(B, R))


@dataclass(frozen=True)
class ScalingReport:
    """Scale-by-scale variance table, fitted slope with bootstrap CI, and target."""

    js: tuple
    gammas: tuple
    counts: tuple
    var: tuple
    se: tuple
    slope: float
    slope_ci: tuple
    target: float
    replicates: int
    regime: str
    config: dict = field(default_factory=dict)
    normalization: dict | None = None

    @property
    def halfwidth(self) -> float:
        return (self.slope_ci[1] - self.slope_ci[0]) / 2

    @property
    def contains_target(self) -> bool:
        return self.slope_ci[0] <= self.target <= self.slope_ci[1]

    def to_dict(self):
        out = asdict(self)
        out["halfwidth"] = self.halfwidth
        out["contains_target"] = self.contains_target
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, default=_jsonable)

    def to_csv(self, path, header_lines=()):
        with open(path, "w", newline="") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            wr = csv.writer(fh)
            wr.writerow(["j", "gamma", "count", "var", "se"])
            for row in zip(self.js, self.gammas, self.counts, self.var, self.se):
                j, g, c, v, s = row
                wr.writerow([j, g, c, repr(float(v)), repr(float(s))])


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _expansion(cfg: PathConfig) -> HermiteExpansion:
    if isinstance(cfg.G, HermiteExpansion):
        return cfg.G
    return hermite_coeffs(cfg.G, name=cfg.G_name)


def _describe(cfg, bank, j_range, replicates):
    return {"d": cfg.model.d, "model": cfg.model.name, "G": cfg.G_name, "K": cfg.K, "n": cfg.n,
            "seed": cfg.seed, "replicates": int(replicates), "bank": bank.family,
            "J": bank.J, "j_range": [int(j) for j in j_range]}


def _fit(table: MomentTable, seed: int, B: int = BOOTSTRAP, ci: float = 0.95):
    V = table.variances()
    keep = np.all(table.counts >= MIN_COEFFS, axis=0)
    for j, ok in zip(table.js, keep):
        if not ok:
            warnings.warn(f"scale j={j} has fewer than {MIN_COEFFS} coefficients; dropped",
                          RuntimeWarning, stacklevel=3)
    js = np.array(table.js, dtype=float)[keep]
    V = V[:, keep]
    if js.size < 2:
        raise ValueError("fewer than two usable scales")
    mean, se, w = _pooled_logvar(V)
    slope, icpt = wls_slope(js, np.log2(mean), w)
    idx = _bootstrap_indices(seed, V.shape[0], B)
    boot = np.empty(B)
    for b in range(B):
        boot[b] = wls_slope(js, np.log2(V[idx[b]].mean(axis=0)), w)[0]
    a = (1 - ci) / 2
    lo, hi = np.quantile(boot, [a, 1 - a])
    return keep, mean, se, slope, (float(lo), float(hi)), idx


def _normalization(cfg, bank, table, keep, mean, idx, q0, c_q0, ci=0.95):
    spec = LimitSpec.from_bank(bank, q0, cfg.model.d, cfg.K)
    var_y = limit_cov_block(spec, [(0, 0)]).matrix[0, 0]
    # largest usable scale: closest to the limit
    col = int(np.nonzero(keep)[0][-1])
    j = table.js[col]
    expo = 2 * (spec.dq + cfg.K)
    V = table.variances()[:, col]
    scale = table.gammas[col] ** expo * var_y
    est = math.sqrt(mean[list(np.nonzero(keep)[0]).index(col)] / scale)
    boot = np.sqrt(V[idx].mean(axis=1) / scale)
    a = (1 - ci) / 2
    lo, hi = (float(v) for v in np.quantile(boot, [a, 1 - a]))
    cands = theorem_normalization(c_q0, cfg.model.fstar_at_zero, q0)
    inside = [lo <= abs(c) <= hi for c in cands]
    names = ("c_q0 f0^(q0/2)", "c_q0/q0! f0^(q0/2)")
    if cands[0] == cands[1]:
        selected = "coincident"
    elif sum(inside) == 1:
        selected = names[inside.index(True)]
    else:
        # no clean separation: report the closer one
        selected = names[int(np.argmin([abs(math.log(abs(c) / est)) for c in cands]))]
    return {"j": j, "estimate": est, "ci": [lo, hi], "limit_var": float(var_y),
            "candidates": {names[0]: abs(cands[0]), names[1]: abs(cands[1])},
            "inside_ci": dict(zip(names, inside)), "selected": selected,
            "unique": cands[0] != cands[1] and sum(inside) == 1}


def scaling_experiment(cfg: PathConfig, bank: FilterBank, j_range, replicates: int,
                       normalization: bool = True, table: MomentTable | None = None,
                       expansion: HermiteExpansion | None = None) -> ScalingReport:
    """Variance-scaling slope in the long-memory regime (target ``2(d(q0)+K)``).

    A precomputed ``table`` from :func:`collect_moments` may be passed to
    share simulations with other checks.
    """
    exp_ = expansion or _expansion(cfg)
    q0, d = exp_.rank, cfg.model.d
    if d <= 0 or q0 > critical_order(d):
        raise ValueError(f"q0={q0} is not in the long-memory range for d={d}")
    if table is None:
        table = collect_moments(cfg, bank, j_range, replicates)
    keep, mean, se, slope, ci, idx = _fit(table, cfg.seed)
    target = 2 * (memory_param(d, q0) + cfg.K)
    norm = None
    if normalization:
        norm = _normalization(cfg, bank, table, keep, mean, idx, q0, exp_.c(q0))
    return _report(table, keep, mean, se, slope, ci, target, "long-range",
                   _describe(cfg, bank, j_range, table.replicates), norm)


def short_range_experiment(cfg: PathConfig, bank: FilterBank, j_range, replicates: int,
                           table: MomentTable | None = None,
                           expansion: HermiteExpansion | None = None) -> ScalingReport:
    """Variance-scaling slope when the Hermite rank exceeds the critical order (target ``2K``)."""
    exp_ = expansion or _expansion(cfg)
    q0, d = exp_.rank, cfg.model.d
    if d > 0 and q0 <= critical_order(d):
        raise ValueError(f"q0={q0} is in the long-memory range for d={d}")
    if table is None:
        table = collect_moments(cfg, bank, j_range, replicates)
    keep, mean, se, slope, ci, _ = _fit(table, cfg.seed)
    return _report(table, keep, mean, se, slope, ci, 2.0 * cfg.K, "short-range",
                   _describe(cfg, bank, j_range, table.replicates), None)


def _report(table, keep, mean, se, slope, ci, target, regime, config, norm):
    js = tuple(j for j, k in zip(table.js, keep) if k)
    gammas = tuple(g for g, k in zip(table.gammas, keep) if k)
    counts = tuple(int(c) for c in table.counts[:, keep].sum(axis=0))
    return ScalingReport(js, gammas, counts, tuple(float(v) for v in mean),
                         tuple(float(v) for v in se), float(slope), ci, float(target),
                         table.replicates, regime, config, norm)


def _pooled_standard_moments(s2, s3, s4, n):
    N = math.fsum(n)
    m2, m3, m4 = math.fsum(s2) / N, math.fsum(s3) / N, math.fsum(s4) / N
    return m3 / m2**1.5, m4 / m2**2


def gaussianity_from_moments(counts, s2, s3, s4):
    """Pooled skewness and kurtosis with jackknife standard errors over replicates."""
    n, s2, s3, s4 = (np.asarray(v, dtype=float) for v in (counts, s2, s3, s4))
    skew, kurt = _pooled_standard_moments(s2, s3, s4, n)
    R = n.size
    jk = np.array([_pooled_standard_moments(np.delete(s2, r), np.delete(s3, r),
                                            np.delete(s4, r), np.delete(n, r))
                   for r in range(R)])
    se = np.sqrt((R - 1) / R * ((jk - jk.mean(axis=0)) ** 2).sum(axis=0))
    return {"skewness": skew, "kurtosis": kurt, "excess_kurtosis": kurt - 3.0,
            "se_skewness": float(se[0]), "se_kurtosis": float(se[1]),
            "replicates": R, "count": int(n.sum())}


def gaussianity_check(coeffs, q0: int, j: int | None = None):
    """Pooled moments of the coefficients at scale ``j`` (default: largest).

    ``coeffs`` is a :class:`CoeffMatrix` or a sequence of them, one per
    replicate.  For ``q0 = 1`` Gaussian moments ``(0, 3)`` are expected; for
    ``q0 >= 2`` the excess kurtosis should be positive.
    """
    mats = [coeffs] if isinstance(coeffs, CoeffMatrix) else list(coeffs)
    j = max(mats[0].scales) if j is None else j
    sums = np.array([_moments(np.asarray(m.w(j), dtype=float)) for m in mats])
    if len(mats) == 1:
        # a single path: contiguous blocks act as pseudo-replicates
        w = np.asarray(mats[0].w(j), dtype=float)
        sums = np.array([_moments(b) for b in np.array_split(w, min(20, w.size))])
    out = gaussianity_from_moments(*sums.T)
    out.update({"j": int(j), "q0": int(q0)})
    if q0 == 1:
        out["expected"] = "gaussian"
    else:
        out["expected"] = "positive excess kurtosis"
    return out


def estimate_memory(coeffs, j1: int, j2: int, seed: int = 0, B: int = BOOTSTRAP,
                    ci: float = 0.95):
    """Estimate ``d(q0) + K`` as half the log2-variance slope over ``j1..j2``.

    ``coeffs`` is a :class:`CoeffMatrix` or a sequence of them (replicates).
    The CI comes from resampling replicates; a single matrix is split into
    contiguous blocks that act as pseudo-replicates.
    """
    if j2 < j1 + 2:
        raise ValueError("need at least 3 scales (j2 >= j1 + 2)")
    mats = [coeffs] if isinstance(coeffs, CoeffMatrix) else list(coeffs)
    js = [j for j in range(j1, j2 + 1) if all(j in m.levels for m in mats)]
    if len(js) < 3:
        raise ValueError("fewer than 3 scales available")
    if len(mats) == 1:
        blocks = 8
        V = np.array([[np.mean(b**2) for b in np.array_split(mats[0].w(j), blocks)]
                      for j in js]).T
    else:
        V = np.array([[np.mean(np.asarray(m.w(j)) ** 2) for j in js] for m in mats])
    mean, _, w = _pooled_logvar(V)
    x = np.array(js, dtype=float)
    slope, _ = wls_slope(x, np.log2(mean), w)
    idx = _bootstrap_indices(seed, V.shape[0], B)
    boot = np.array([wls_slope(x, np.log2(V[i].mean(axis=0)), w)[0] for i in idx])
    a = (1 - ci) / 2
    lo, hi = np.quantile(boot, [a, 1 - a])
    return slope / 2, (float(lo) / 2, float(hi) / 2)


def limit_cov_comparison(cfg: PathConfig, bank: FilterBank, j: int, lags, replicates: int,
                         coeffs=None):
    """Empirical ``Corr(W_{j,k}, W_{j,k+l})`` against the limit-field correlation.

    Empirical lagged products are pooled over positions and replicates.
    """
    exp_ = _expansion(cfg)
    q0, d = exp_.rank, cfg.model.d
    if q0 > critical_order(d):
        raise ValueError("limit covariance requires q0 <= q_c")
    lags = [int(l) for l in lags]
    if coeffs is None:
        _, coeffs = collect_moments(cfg, bank, [j], replicates, keep={j})
    num = {l: [] for l in lags}
    den = []
    for cm in coeffs:
        w = np.asarray(cm.w(j), dtype=float)
        den.append(math.fsum(w * w) / w.size)
        for l in lags:
            num[l].append(math.fsum(w[: w.size - l] * w[l:]) / (w.size - l))
    var = math.fsum(den) / len(den)
    emp = np.array([math.fsum(num[l]) / len(num[l]) / var for l in lags])
    spec = LimitSpec.from_bank(bank, q0, d, cfg.K)
    block = limit_cov_block(spec, [(0, 0)] + [(0, l) for l in lags])
    lim = block.matrix[0, 1:] / block.matrix[0, 0]
    dev = np.abs(emp - lim)
    return {"j": int(j), "lags": lags, "empirical": emp.tolist(), "limit": lim.tolist(),
            "deviation": dev.tolist(), "max_deviation": float(dev.max()),
            "replicates": len(coeffs)}


# (d, G, K, regime) configurations of the regime table
REGIME_TABLE = (
    (0.35, "identity", 0, "long-range"),
    (0.35, "H2", 0, "long-range"),
    (0.35, "identity", 1, "long-range"),
    (0.2, "identity", 0, "long-range"),
    (0.2, "H2", 0, "short-range"),
    (0.2, "H2", 1, "short-range"),
)
