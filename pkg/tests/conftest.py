import numpy as np
import pytest
from threadpoolctl import threadpool_limits

from covmtt import ThresholdParams, diff_grid, mtt_scan, t_stat


def random_corpus(seed, max_p=20, max_n=50):
    """A seeded (x, y) pair with random shapes; every third corpus gets
    per-column scale and shift to exercise non-unit variances."""
    rng = np.random.default_rng(seed)
    p = int(rng.integers(4, max_p + 1))
    n1 = int(rng.integers(8, max_n + 1))
    n2 = int(rng.integers(8, max_n + 1))
    x = rng.standard_normal((n1, p))
    y = rng.standard_normal((n2, p))
    if seed % 3 == 0:
        scale = rng.uniform(0.5, 3.0, p)
        x = x * scale + rng.uniform(-2.0, 2.0, p)
        y = y * scale
    return x, y


@pytest.fixture(scope="session")
def h0_reference_mc():
    """2000 null replicates (independent Gaussian, p=200, n1=n2=100):
    T_n(0.6) and the scan maximum V_n for each; shared by the moment and
    distributional checks."""
    p, n, reps, s = 200, 100, 2000, 0.6
    params = ThresholdParams()
    t_vals = np.empty(reps)
    v_vals = np.empty(reps)
    with threadpool_limits(limits=1):
        for b in range(reps):
            rng = np.random.Generator(
                np.random.Philox(np.random.SeedSequence(777, spawn_key=(b,)))
            )
            x = rng.standard_normal((n, p))
            y = rng.standard_normal((n, p))
            grid = diff_grid(x, y)
            t_vals[b] = t_stat(grid, s)
            v_vals[b] = mtt_scan(grid, params).v_n
    return {"p": p, "n": n, "s": s, "t": t_vals, "v": v_vals}
