import math

import numpy as np
import pytest
from scipy import integrate
from scipy.special import gamma as gamma_fn

from hermwave.filters import build_mra_bank
from hermwave.limit import (DivergenceError, LimitCov, LimitSpec, gamma_factor, limit_cov,
                            limit_cov_block, membership_S, ss_exponent, theorem_normalization)

from oracles import beta_power_integral, brute_force_variance, inner_kernel


@pytest.fixture(scope="module")
def haar():
    return build_mra_bank("haar", 8)


@pytest.fixture(scope="module")
def db2():
    return build_mra_bank("db2", 8)


def test_gamma_factor_q1():
    assert gamma_factor(1, 0.3) == 1.0


@pytest.mark.parametrize("d", [0.3, 0.35, 0.45])
def test_gamma_factor_q2_beta_oracle(d):
    ref = beta_power_integral(-2 * d, -2 * d)
    assert gamma_factor(2, d) == pytest.approx(ref, rel=1e-3)
    assert gamma_factor(2, d) == pytest.approx(ref, rel=1e-10)


def test_gamma_factor_q3():
    d, q = 0.4, 3
    ref = 1.0
    for i in range(2, q + 1):
        ref *= beta_power_integral(q - i - 2 * d * (q - i + 1), -2 * d)
    coarse, fine = gamma_factor(3, d, nodes=20), gamma_factor(3, d, nodes=40)
    assert math.isfinite(fine)
    assert abs(fine / coarse - 1) < 5e-3
    assert fine == pytest.approx(ref, rel=1e-10)


def test_gamma_factor_divergent():
    with pytest.raises(DivergenceError):
        gamma_factor(2, 0.25)
    with pytest.raises(DivergenceError):
        gamma_factor(4, 0.35)


def test_ss_exponent_examples():
    assert ss_exponent(1, 0.3, 1) == pytest.approx(0.8)
    for q, d in [(2, 0.35), (3, 0.4), (1, 0.1)]:
        dq = q * d + (1 - q) / 2
        H1 = ss_exponent(q, d, 1)
        assert H1 == pytest.approx(dq + 0.5) and 0.5 < H1 < 1
        H0 = ss_exponent(q, d, 0)
        assert H0 == pytest.approx(dq - 0.5) and -0.5 < H0 < 0


def test_theorem_normalization():
    a, b = theorem_normalization(1.3, 0.2, 1)
    assert a == b
    c = 0.21
    a, b = theorem_normalization(2.0, c, 2)
    assert a == pytest.approx(2 * c) and b == pytest.approx(c)
    with pytest.raises(ValueError):
        theorem_normalization(0.0, c, 2)


def test_membership_compact_support():
    theta = lambda x: ((x >= 1) & (x <= 2)).astype(float)
    finite, value = membership_S(theta, 2, 0.35, 3)
    assert finite
    e = 2 - 1 - 1.4 - 6
    assert value == pytest.approx((2 ** (e + 1) - 1) / (e + 1), rel=1e-3)


def test_membership_gaussian_closed_form():
    theta = lambda x: np.exp(-x**2 / 2)
    q, d, K = 1, 0.3, 0
    e = q - 1 - 2 * d * q - 2 * K
    finite, value = membership_S(theta, q, d, K)
    assert finite
    assert value == pytest.approx(gamma_fn((e + 1) / 2), rel=1e-4)


@pytest.mark.parametrize("q,K", [(1, 1), (2, 1), (1, 2)])
def test_membership_divergent_at_origin(q, K):
    theta = lambda x: np.exp(-x**2)
    finite, value = membership_S(theta, q, 0.3, K)
    assert not finite and value == math.inf


@pytest.mark.parametrize("name", ["haar", "db2", "db3"])
def test_membership_limit_wavelet(name):
    bank = build_mra_bank(name, 8)
    for K in range(bank.M + 1):
        finite, _ = membership_S(bank.hinf, 1, 0.35, K)
        assert finite
    finite, _ = membership_S(bank.hinf, 1, 0.35, bank.M + 1)
    assert not finite


def test_spec_rejects_bad_order():
    with pytest.raises(DivergenceError):
        LimitSpec.from_bank(build_mra_bank("haar", 8), 4, 0.35, 0)
    with pytest.raises(ValueError):
        LimitSpec.from_bank(build_mra_bank("haar", 8), 1, 0.35, 2)


def test_spec_membership_enforced():
    # h(u)/(iu)^K with a flat h near 0 is not admissible for K=1, q=1
    with pytest.raises(DivergenceError):
        LimitSpec(1, 0.3, 1, lambda u: np.exp(-u**2) / (1j * u), 1.0, 1.0, 1.0)


def test_gaussian_case(haar):
    spec = LimitSpec.from_bank(haar, 1, 0.35, 0)
    v, err = limit_cov(spec, (0, 0), (0, 0))
    f = lambda s: float(np.abs(haar.hinf(np.array([s]))[0]) ** 2) * s**-0.7
    total = integrate.quad(f, 0, 1, limit=200)[0]
    for a in range(1, 20000, 50):
        total += integrate.quad(f, a, a + 50, limit=200)[0]
    assert v == pytest.approx(2 * total, rel=1e-4)
    assert err < 1e-5 * v


@pytest.fixture(scope="module")
def kernel_q2():
    return inner_kernel(0.35, 2)


@pytest.mark.parametrize("K", [0, 1])
def test_reduction_matches_brute_force_q2(haar, kernel_q2, K):
    spec = LimitSpec.from_bank(haar, 2, 0.35, K)
    v, _ = limit_cov(spec, (0, 0), (0, 0))
    assert v == pytest.approx(brute_force_variance(0.35, 2, K, kernel_q2), rel=1e-2)


@pytest.mark.parametrize("name", ["haar", "db2"])
@pytest.mark.parametrize("q,K", [(1, 0), (1, 1), (2, 0), (2, 1)])
def test_self_similarity(name, q, K):
    bank = build_mra_bank(name, 8)
    spec = LimitSpec.from_bank(bank, q, 0.35, K)
    v0 = limit_cov(spec, (0, 0), (0, 0))[0]
    for m in (1, 2, 3):
        vm = limit_cov(spec, (m, 0), (m, 0))[0]
        assert vm / v0 == pytest.approx(2.0 ** (2 * m * (spec.dq + K)), rel=1e-2)
        assert vm / v0 == pytest.approx(2.0 ** (2 * m * (spec.dq + K)), rel=1e-5)


def test_self_similarity_q3(haar):
    spec = LimitSpec.from_bank(haar, 3, 0.4, 0)
    v0 = limit_cov(spec, (0, 0), (0, 0))[0]
    v2 = limit_cov(spec, (2, 0), (2, 0))[0]
    assert v2 / v0 == pytest.approx(2.0 ** (4 * spec.dq), rel=1e-5)


def test_shift_stationarity(db2):
    spec = LimitSpec.from_bank(db2, 2, 0.35, 1)
    block = limit_cov_block(spec, [(1, k) for k in range(4)])
    C = block.matrix
    for a in range(4):
        for b in range(4):
            for c in range(4):
                for d in range(4):
                    if a - b == c - d:
                        assert C[a, b] == pytest.approx(C[c, d], rel=1e-10)
    # a standalone pair uses its own panel width, so agreement is at quadrature tolerance
    single = limit_cov(spec, (1, 3), (1, 1))[0]
    assert single == pytest.approx(C[3, 1], rel=1e-6)


@pytest.mark.parametrize("q,K", [(1, 0), (2, 0), (2, 1)])
def test_block_is_covariance(haar, q, K):
    spec = LimitSpec.from_bank(haar, q, 0.35, K)
    index = [(m, k) for m in range(3) for k in range(4)]
    block = limit_cov_block(spec, index)
    C = block.matrix
    assert np.array_equal(C, C.T)
    assert np.all(np.diag(C) > 0)
    assert block.is_psd()
    R = block.correlation()
    assert np.allclose(np.diag(R), 1.0)
    assert np.all(np.abs(R) <= 1 + 1e-9)


def test_cross_scale_entry_matches_pair(haar):
    spec = LimitSpec.from_bank(haar, 2, 0.35, 0)
    block = limit_cov_block(spec, [(0, 1), (1, 2)])
    assert block.matrix[0, 1] == pytest.approx(limit_cov(spec, (0, 1), (1, 2))[0], rel=1e-12)


def test_error_estimates_small(db2):
    spec = LimitSpec.from_bank(db2, 2, 0.35, 0)
    block = limit_cov_block(spec, [(0, 0), (0, 1), (1, 0)])
    assert np.all(block.err <= 1e-4 * np.abs(block.matrix).max())


def test_limit_cov_csv(tmp_path, haar):
    spec = LimitSpec.from_bank(haar, 1, 0.35, 0)
    block = limit_cov_block(spec, [(0, 0), (0, 1)])
    path = tmp_path / "l.csv"
    block.to_csv(path, ["config: {}"])
    lines = path.read_text().splitlines()
    assert lines[1] == "m,k,mp,kp,cov,err"
    assert len(lines) == 2 + 4
    m, k, mp, kp, cov, err = lines[3].split(",")
    assert (m, k, mp, kp) == ("0", "0", "0", "1")
    assert float(cov) == block.matrix[0, 1]


def test_limitcov_psd_flag():
    bad = LimitCov(((0, 0), (0, 1)), np.array([[1.0, 2.0], [2.0, 1.0]]), np.zeros((2, 2)))
    assert not bad.is_psd()
