"""Comparison tests: the max statistic and the squared-Frobenius U-statistic.

clx_statistic is the largest squared standardized difference M_ij.
lc_statistic is the unbiased U-statistic estimator of ||Sigma1 - Sigma2||_F^2,
computed from Gram matrices in O(n^2 p); lc_test_statistic divides it by the
plug-in null standard deviation 2(A1/n1 + A2/n2) and is what the l2 test and
the simulation harness actually use.  Both tests are calibrated here by the
same parametric bootstrap used for the scan test; the max statistic's
extreme-value calibration is not shipped because its norming constants come
from an external source this package does not vendor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from joblib import Parallel, delayed, parallel_config
from threadpoolctl import threadpool_limits

from .bootstrap import pd_pooled_covariance
from .errors import DataError, NumericError
from .grids import DiffGrid, SampleMatrix, _check_pair, diff_grid
from .mtt import TestOutcome


@dataclass(frozen=True)
class RivalConfig:
    method: str = "clx"
    calibration: str = "bootstrap"
    B: int = 250
    seed: int = 0

    def __post_init__(self):
        if self.method not in ("clx", "lc"):
            raise ValueError(f"method must be clx or lc, got {self.method!r}")
        if self.calibration not in ("bootstrap", "asymptotic"):
            raise ValueError(f"unknown calibration {self.calibration!r}")
        if self.calibration == "bootstrap" and self.B < 1:
            raise ValueError(f"B must be >= 1, got {self.B}")


def clx_statistic(grid: DiffGrid) -> float:
    """max over i <= j of M_ij."""
    return float(np.max(grid.m))


def _trace_square_unbiased(data):
    """U-statistic estimator of tr(Sigma^2) from one sample, mean unknown.

    Three terms over ordered index tuples with distinct entries:
      sum_{j!=k} (x_j'x_k)^2 / P2
      - 2 * sum_{j,k,l} x_j'x_k x_k'x_l / P3
      + sum_{j,k,l,m} x_j'x_k x_l'x_m / P4
    reduced to Gram-matrix sums (H = gram with zeroed diagonal):
      S1 = sum H^2,  S2 = sum rowsum(H)^2 - S1,
      S3 = (sum H)^2 - 4 * sum rowsum(H)^2 + 2 * S1.
    """
    n = data.shape[0]
    if n < 4:
        raise DataError(f"need at least 4 observations, got n={n}")
    g = data @ data.T
    h = g - np.diag(np.diag(g))
    ss = float(np.sum(h * h))
    rho = h.sum(axis=1)
    sum_rho2 = float(rho @ rho)
    w0 = float(rho.sum())
    s1 = ss
    s2 = sum_rho2 - ss
    s3 = w0 * w0 - 4.0 * sum_rho2 + 2.0 * ss
    p2 = n * (n - 1)
    p3 = p2 * (n - 2)
    p4 = p3 * (n - 3)
    return s1 / p2 - 2.0 * s2 / p3 + s3 / p4


def _trace_cross_unbiased(x, y):
    """U-statistic estimator of tr(Sigma1 Sigma2), mean unknown.

    With K = X Y', d = K 1, c = K' 1, W = sum K:
      C1 = sum K^2
      C2 = sum c^2 - C1           (shared y index)
      C3 = sum d^2 - C1           (shared x index)
      C4 = W^2 - sum d^2 - sum c^2 + C1
    combined as C1/(n1 n2) - C2/(P2(n1) n2) - C3/(n1 P2(n2)) + C4/(P2(n1) P2(n2)).
    """
    n1, n2 = x.shape[0], y.shape[0]
    k = x @ y.T
    c1 = float(np.sum(k * k))
    d = k.sum(axis=1)
    c = k.sum(axis=0)
    sum_d2 = float(d @ d)
    sum_c2 = float(c @ c)
    w = float(d.sum())
    c2 = sum_c2 - c1
    c3 = sum_d2 - c1
    c4 = w * w - sum_d2 - sum_c2 + c1
    p2_1 = n1 * (n1 - 1)
    p2_2 = n2 * (n2 - 1)
    return c1 / (n1 * n2) - c2 / (p2_1 * n2) - c3 / (n1 * p2_2) + c4 / (p2_1 * p2_2)


def lc_statistic(x: SampleMatrix | np.ndarray, y: SampleMatrix | np.ndarray) -> float:
    """Unbiased estimator of ||Sigma1 - Sigma2||_F^2: A1 + A2 - 2C."""
    x, y = _check_pair(x, y)
    a1 = _trace_square_unbiased(x.data)
    a2 = _trace_square_unbiased(y.data)
    c = _trace_cross_unbiased(x.data, y.data)
    return a1 + a2 - 2.0 * c


def lc_test_statistic(x: SampleMatrix | np.ndarray, y: SampleMatrix | np.ndarray) -> float:
    """The l2 test statistic: the Frobenius-distance estimator divided by a
    plug-in of its null standard deviation, 2(A1/n1 + A2/n2).

    The denominator is what makes this the published test rather than the
    raw distance estimate: it rescales by the data's own trace(Sigma^2)
    level, so the statistic is approximately standard normal under the null
    regardless of the covariance scale.
    """
    x, y = _check_pair(x, y)
    a1 = _trace_square_unbiased(x.data)
    a2 = _trace_square_unbiased(y.data)
    c = _trace_cross_unbiased(x.data, y.data)
    sd = 2.0 * (a1 / x.n + a2 / y.n)
    if sd <= 0.0:
        raise NumericError(
            f"null standard deviation plug-in is not positive: {sd}"
        )
    return (a1 + a2 - 2.0 * c) / sd


def _rival_replicate(chol, n1, n2, method, seed, b):
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(b,))))
    z = rng.standard_normal((n1 + n2, chol.shape[0]))
    xy = z @ chol.T
    xs, ys = xy[:n1], xy[n1:]
    if method == "clx":
        return clx_statistic(diff_grid(xs, ys))
    return lc_test_statistic(xs, ys)


def rival_test(
    x: SampleMatrix | np.ndarray,
    y: SampleMatrix | np.ndarray,
    cfg: RivalConfig,
    alpha: float = 0.05,
    threads: int = 1,
) -> TestOutcome:
    """Bootstrap-calibrated decision for either rival statistic.

    calibration="asymptotic" raises: the only candidate (the max statistic's
    extreme-value law) depends on external norming constants that were never
    verified here, and no asymptotic null is available for the U-statistic.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    if cfg.calibration == "asymptotic":
        raise ValueError(
            f"asymptotic calibration is not supported for {cfg.method!r}; use bootstrap"
        )
    x, y = _check_pair(x, y)
    if cfg.method == "clx":
        stat = clx_statistic(diff_grid(x, y))
    else:
        stat = lc_test_statistic(x, y)
    est = pd_pooled_covariance(x, y)
    args = (est.chol, x.n, y.n, cfg.method, cfg.seed)
    if threads == 1:
        with threadpool_limits(limits=1):
            vals = [_rival_replicate(*args, b) for b in range(cfg.B)]
    else:
        n_jobs = -1 if threads == 0 else threads
        with parallel_config(backend="loky", inner_max_num_threads=1):
            vals = Parallel(n_jobs=n_jobs)(
                delayed(_rival_replicate)(*args, b) for b in range(cfg.B)
            )
    pval = float(np.sum(np.asarray(vals) > stat)) / cfg.B
    return TestOutcome(
        method=cfg.method,
        statistic=stat,
        reject=bool(pval < alpha),
        p_value=pval,
        critical_value=None,
        params={
            "calibration": cfg.calibration,
            "alpha": alpha,
            "B": cfg.B,
            "seed": cfg.seed,
            "p": x.p,
            "n1": x.n,
            "n2": y.n,
        },
    )
