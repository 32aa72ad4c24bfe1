"""Entry-wise standardized differences between two sample covariance matrices.

Given samples ``x`` (n1 x p) and ``y`` (n2 x p), each upper-triangular pair
(i, j) gets a studentized difference

    F_ij = (sigma1_ij - sigma2_ij) / sqrt(theta1_ij/n1 + theta2_ij/n2)

where sigma_h is the sample covariance and theta_h_ij estimates the variance
of the centered products whose mean is sigma_h_ij.  All moment estimates use
divisor n, not n - 1.  Under equal covariances each F_ij is asymptotically
standard normal, so M_ij = F_ij**2 is the squared signal the thresholding
statistics consume.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class SampleMatrix:
    """Validated n x p data matrix, rows are observations."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 2:
            raise DataError(f"expected a 2-d array, got ndim={arr.ndim}")
        n, p = arr.shape
        if n < 2:
            raise DataError(f"need at least 2 observations, got n={n}")
        if p < 2:
            raise DataError(f"need at least 2 variables, got p={p}")
        if not np.all(np.isfinite(arr)):
            raise DataError("data contains non-finite entries")
        object.__setattr__(self, "data", arr)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def p(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class MomentSet:
    """First, second, and fourth-moment estimates for one sample.

    ``theta[i, j] / n`` is the plug-in variance of ``sigma[i, j]``.
    """

    mean: np.ndarray
    sigma: np.ndarray
    theta: np.ndarray
    n: int

    @property
    def p(self) -> int:
        return self.sigma.shape[0]


def compute_moments(x: SampleMatrix | np.ndarray) -> MomentSet:
    """Mean, covariance, and product-variance estimates, all with divisor n.

    theta_ij = (1/n) sum_k {(x_ki - xbar_i)(x_kj - xbar_j) - sigma_ij}^2
    is computed through the identity mean(c^2) - sigma^2 where c are the
    centered products, which needs only two matrix products.  Tiny negative
    values from cancellation are clipped to zero.
    """
    if not isinstance(x, SampleMatrix):
        x = SampleMatrix(x)
    arr = x.data
    n = x.n
    mean = arr.mean(axis=0)
    xc = arr - mean
    sigma = xc.T @ xc / n
    xc2 = xc * xc
    second = xc2.T @ xc2 / n  # second[i, j] = mean_k xc_ki^2 xc_kj^2
    theta = np.maximum(second - sigma * sigma, 0.0)
    return MomentSet(mean=mean, sigma=sigma, theta=theta, n=n)


@dataclass(frozen=True)
class DiffGrid:
    """Packed upper-triangular grid of standardized covariance differences.

    Arrays are length q = p(p+1)/2 in row-major upper-triangular order;
    ``rows``/``cols`` give the (i, j) index of each slot.  ``m = f**2`` and
    ``var_den`` is the denominator variance theta1/n1 + theta2/n2 (set to
    the 1.0 sentinel on the diagonal slots of a correlation grid, whose f
    is identically zero).
    """

    p: int
    rows: np.ndarray
    cols: np.ndarray
    f: np.ndarray
    m: np.ndarray
    var_den: np.ndarray
    n1: int
    n2: int

    @property
    def q(self) -> int:
        return self.p * (self.p + 1) // 2

    @property
    def n_eff(self) -> float:
        n1, n2 = self.n1, self.n2
        return n1 * n2 / (n1 + n2)


def _check_pair(x, y, min_n=4):
    if not isinstance(x, SampleMatrix):
        x = SampleMatrix(x)
    if not isinstance(y, SampleMatrix):
        y = SampleMatrix(y)
    if x.p != y.p:
        raise DataError(f"dimension mismatch: x has p={x.p}, y has p={y.p}")
    if x.n < min_n or y.n < min_n:
        raise DataError(
            f"need at least {min_n} observations per sample, got n1={x.n}, n2={y.n}"
        )
    return x, y


def diff_grid(x: SampleMatrix | np.ndarray, y: SampleMatrix | np.ndarray) -> DiffGrid:
    """Standardized covariance differences for all upper-triangular pairs.

    Raises ``DataError`` if dimensions mismatch, either sample has fewer
    than 4 observations, or some pair has a non-positive variance estimate
    (e.g. a constant column in both samples).
    """
    x, y = _check_pair(x, y)
    mx = compute_moments(x)
    my = compute_moments(y)
    p = x.p
    iu = np.triu_indices(p)
    num = mx.sigma[iu] - my.sigma[iu]
    den = mx.theta[iu] / mx.n + my.theta[iu] / my.n
    bad = den <= 0.0
    if np.any(bad):
        k = int(np.flatnonzero(bad)[0])
        i, j = int(iu[0][k]), int(iu[1][k])
        raise DataError(f"degenerate variance estimate at pair ({i}, {j})")
    f = num / np.sqrt(den)
    return DiffGrid(
        p=p,
        rows=iu[0],
        cols=iu[1],
        f=f,
        m=f * f,
        var_den=den,
        n1=x.n,
        n2=y.n,
    )


def correlation_diff_grid(
    x: SampleMatrix | np.ndarray, y: SampleMatrix | np.ndarray
) -> DiffGrid:
    """Standardized differences of sample correlations instead of covariances.

    The variance of each rho_hat_ij is a delta-method quadratic form: with
    gradient w = (1/sqrt(s_ii s_jj), -rho/(2 s_ii), -rho/(2 s_jj)) applied to
    the plug-in covariance of the centered products for pairs (ij, ii, jj).
    Diagonal slots compare 1 with 1, so f is exactly zero there.  Scale
    changes of individual columns leave the statistic invariant.
    """
    x, y = _check_pair(x, y)
    p = x.p
    iu = np.triu_indices(p)
    off = iu[0] != iu[1]

    stats = []
    for s in (x, y):
        arr = s.data
        n = s.n
        xc = arr - arr.mean(axis=0)
        sigma = xc.T @ xc / n
        d = np.diag(sigma)
        if np.any(d <= 0.0):
            k = int(np.flatnonzero(d <= 0.0)[0])
            raise DataError(f"degenerate variance estimate at pair ({k}, {k})")
        xc2 = xc * xc
        second = xc2.T @ xc2 / n
        third = (xc * xc2).T @ xc / n  # third[i, j] = mean_k xc_ki^3 xc_kj
        i, j = iu
        s_ij, s_ii, s_jj = sigma[i, j], d[i], d[j]
        rho = s_ij / np.sqrt(s_ii * s_jj)
        # plug-in covariances of centered products c_ij, c_ii, c_jj
        g11 = second[i, j] - s_ij * s_ij
        g22 = second[i, i] - s_ii * s_ii
        g33 = second[j, j] - s_jj * s_jj
        g12 = third[i, j] - s_ij * s_ii
        g13 = third[j, i] - s_ij * s_jj
        g23 = second[i, j] - s_ii * s_jj
        w1 = 1.0 / np.sqrt(s_ii * s_jj)
        w2 = -rho / (2.0 * s_ii)
        w3 = -rho / (2.0 * s_jj)
        var = (
            w1 * w1 * g11
            + w2 * w2 * g22
            + w3 * w3 * g33
            + 2.0 * (w1 * w2 * g12 + w1 * w3 * g13 + w2 * w3 * g23)
        )
        stats.append((rho, var, n))

    (rho1, v1, n1), (rho2, v2, n2) = stats
    den = v1 / n1 + v2 / n2
    bad = off & (den <= 0.0)
    if np.any(bad):
        k = int(np.flatnonzero(bad)[0])
        i, j = int(iu[0][k]), int(iu[1][k])
        raise DataError(f"degenerate variance estimate at pair ({i}, {j})")
    f = np.zeros(iu[0].shape[0])
    f[off] = (rho1[off] - rho2[off]) / np.sqrt(den[off])
    var_den = np.where(off, den, 1.0)
    return DiffGrid(
        p=p,
        rows=iu[0],
        cols=iu[1],
        f=f,
        m=f * f,
        var_den=var_den,
        n1=n1,
        n2=n2,
    )
