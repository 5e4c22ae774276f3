import warnings

import pytest

from hermwave.filters import build_mra_bank
from hermwave.hermite import builtin_filter, hermite_coeffs
from hermwave.mc import REGIME_TABLE, collect_moments
from hermwave.spectra import farima
from hermwave.synth import PathConfig

# desk-scale Monte Carlo design shared by the regime-table checks
MC_N = 2**17
MC_REPLICATES = 100
MC_SEED = 1
MC_J = 10
MC_SCALES = tuple(range(3, MC_J + 1))

_ACCEPTANCE = {}


def record_acceptance(number, passed, detail):
    _ACCEPTANCE[number] = (bool(passed), detail)
    line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE, key=lambda n: (int(str(n).rstrip("s")), str(n))):
        passed, detail = _ACCEPTANCE[number]
        terminalreporter.write_line(
            f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}")


def regime_config(d, G, K, n=MC_N, seed=MC_SEED):
    return PathConfig(farima(d), builtin_filter(G), K, n, seed, 0, G)


@pytest.fixture(scope="session")
def haar_bank():
    return build_mra_bank("haar", MC_J)


@pytest.fixture(scope="session")
def regime_runs(haar_bank):
    """Moment tables for the six regime configurations (one simulation each)."""
    runs = {}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for d, G, K, regime in REGIME_TABLE:
            cfg = regime_config(d, G, K)
            bank = build_mra_bank("haar", MC_J, K=K)
            table = collect_moments(cfg, bank, MC_SCALES, MC_REPLICATES)
            expansion = hermite_coeffs(builtin_filter(G), name=G)
            runs[(d, G, K)] = (cfg, bank, table, expansion, regime)
    return runs
