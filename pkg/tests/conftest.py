import numpy as np
import pytest

from borf import kernels

ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


def random_panel(rng, n, k, m_lo, m_hi, missing=0.1, walk=True):
    """Ragged panel of random walks with about `missing` fraction of NaNs."""
    series = []
    for _ in range(n):
        sigs = []
        for _ in range(k):
            m = int(rng.integers(m_lo, m_hi + 1))
            x = rng.normal(size=m)
            if walk:
                x = x.cumsum()
            x[rng.random(m) < missing] = np.nan
            sigs.append(x)
        series.append(sigs)
    return series


def oracle_configs(configs):
    """Plain-dict view of package configs for the naive oracle."""
    return [
        {
            "cid": c.config_id, "w": c.w, "d": c.d, "s": c.s, "l": c.l, "beta": c.beta,
            "mean_bps": list(c.alphabet.mean_breakpoints), "slope_bps": list(c.alphabet.slope_breakpoints),
        }
        for c in configs
    ]


def bag_as_dict(model, bag):
    keys = model.word_keys()
    return {(r, keys[c]): v for r, c, v in bag.triplets()}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(params=sorted(kernels.BACKENDS))
def backend(request, monkeypatch):
    """Run a test once per available encoder backend."""
    monkeypatch.setattr(kernels, "encode_signal", kernels.BACKENDS[request.param])
    return request.param


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
