"""Parametric bootstrap null distribution for the multi-level scan statistic.

The two samples are pooled into a positive-definite covariance estimate
(soft thresholding plus an eigenvalue floor), B Gaussian replicate pairs are
drawn from it, and the scan statistic recomputed on each.  Replicate b's
random stream depends on (seed, b) only, so replicates can run in any order
or in parallel without changing the result.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from joblib import Parallel, delayed, parallel_config
from threadpoolctl import threadpool_limits

from .errors import NumericError
from .grids import SampleMatrix, diff_grid
from .mtt import TestOutcome, ThresholdParams, mtt_scan


@dataclass(frozen=True)
class PdCovEstimate:
    """Pooled covariance estimate, floored to be positive definite."""

    matrix: np.ndarray
    threshold_level: float
    eig_floor: float
    chol: np.ndarray

    @property
    def p(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class BootstrapNull:
    values: np.ndarray
    B: int
    seed: int
    params: ThresholdParams


def pd_pooled_covariance(
    x: SampleMatrix | np.ndarray,
    y: SampleMatrix | np.ndarray,
    threshold_mult: float = 1.0,
    eig_floor: float = 0.05,
) -> PdCovEstimate:
    """Pooled covariance, soft-thresholded off the diagonal and eigenvalue-floored.

    Each group is centered at its own mean; the pooled residuals use divisor
    n1 + n2.  Off-diagonal entries are soft-thresholded at
    threshold_mult * sqrt(log p / (n1 + n2)), then eigenvalues are raised to
    at least eig_floor so a Cholesky factor always exists.
    """
    if eig_floor <= 0.0:
        raise ValueError(f"eig_floor must be > 0, got {eig_floor}")
    if not isinstance(x, SampleMatrix):
        x = SampleMatrix(x)
    if not isinstance(y, SampleMatrix):
        y = SampleMatrix(y)
    if x.p != y.p:
        raise ValueError(f"dimension mismatch: x has p={x.p}, y has p={y.p}")
    p = x.p
    n = x.n + y.n
    xc = x.data - x.data.mean(axis=0)
    yc = y.data - y.data.mean(axis=0)
    pooled = (xc.T @ xc + yc.T @ yc) / n

    level = threshold_mult * math.sqrt(math.log(p) / n)
    off = pooled - np.diag(np.diag(pooled))
    shrunk = np.sign(off) * np.maximum(np.abs(off) - level, 0.0)
    mat = shrunk + np.diag(np.diag(pooled))

    try:
        w, v = np.linalg.eigh(mat)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"eigendecomposition failed: {exc}") from exc
    if w[0] < eig_floor:
        w = np.maximum(w, eig_floor)
        mat = (v * w) @ v.T
        mat = (mat + mat.T) / 2.0
    # else: keep the thresholded matrix verbatim (exact zeros survive)
    try:
        chol = np.linalg.cholesky(mat)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"Cholesky factorization failed: {exc}") from exc
    return PdCovEstimate(matrix=mat, threshold_level=level, eig_floor=eig_floor, chol=chol)


def _replicate_stat(chol, n1, n2, params, seed, b):
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(b,))))
    z = rng.standard_normal((n1 + n2, chol.shape[0]))
    xy = z @ chol.T
    return mtt_scan(diff_grid(xy[:n1], xy[n1:]), params).v_n


def bootstrap_null(
    est: PdCovEstimate,
    n1: int,
    n2: int,
    params: ThresholdParams,
    B: int = 250,
    seed: int = 0,
    threads: int = 1,
) -> BootstrapNull:
    """B replicate scan statistics under N(0, est.matrix) resampling.

    threads: joblib worker count, 0 for all cores.  BLAS is pinned to one
    thread inside the loop so results do not depend on the worker count.
    """
    if B < 1:
        raise ValueError(f"B must be >= 1, got {B}")
    args = (est.chol, n1, n2, params, seed)
    if threads == 1:
        with threadpool_limits(limits=1):
            vals = [_replicate_stat(*args, b) for b in range(B)]
    else:
        n_jobs = -1 if threads == 0 else threads
        with parallel_config(backend="loky", inner_max_num_threads=1):
            vals = Parallel(n_jobs=n_jobs)(
                delayed(_replicate_stat)(*args, b) for b in range(B)
            )
    return BootstrapNull(values=np.asarray(vals, dtype=np.float64), B=B, seed=seed, params=params)


def bootstrap_p_value(null: BootstrapNull, v_n: float, smoothed: bool = False) -> float:
    """Share of replicates strictly above the observed statistic.

    smoothed=True uses (1 + count)/(B + 1), which never returns an exact 0.
    """
    count = int(np.sum(null.values > v_n))
    if smoothed:
        return (1 + count) / (null.B + 1)
    return count / null.B


def mtt_test_bootstrap(
    x: SampleMatrix | np.ndarray,
    y: SampleMatrix | np.ndarray,
    params: ThresholdParams | None = None,
    B: int = 250,
    seed: int = 0,
    threshold_mult: float = 1.0,
    eig_floor: float = 0.05,
    threads: int = 1,
    smoothed: bool = False,
) -> TestOutcome:
    """Multi-level thresholding test calibrated by parametric bootstrap.

    p_value = (1/B) * #{replicates with V* > V_n}; reject iff p_value < alpha.
    """
    if params is None:
        params = ThresholdParams()
    if not isinstance(x, SampleMatrix):
        x = SampleMatrix(x)
    if not isinstance(y, SampleMatrix):
        y = SampleMatrix(y)
    grid = diff_grid(x, y)
    v_n = mtt_scan(grid, params).v_n
    est = pd_pooled_covariance(x, y, threshold_mult=threshold_mult, eig_floor=eig_floor)
    null = bootstrap_null(est, x.n, y.n, params, B=B, seed=seed, threads=threads)
    pval = bootstrap_p_value(null, v_n, smoothed=smoothed)
    return TestOutcome(
        method="mtt_bootstrap",
        statistic=v_n,
        reject=bool(pval < params.alpha),
        p_value=pval,
        critical_value=None,
        params={
            "s0": params.s0,
            "eta": params.eta,
            "alpha": params.alpha,
            "B": B,
            "seed": seed,
            "p": grid.p,
            "n1": x.n,
            "n2": y.n,
        },
    )
