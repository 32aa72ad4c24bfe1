"""Closed-form detection boundaries on the sparsity/strength plane.

rho_mean(beta) is the classical boundary for detecting sparse mean shifts;
rho_star(beta, xi) is the covariance-difference boundary when the dimension
grows like n^xi (xi = 0 recovers the exponential-dimension case).  Signals
with standardized strength r above the curve are detectable by the scan
test; below it no test in the class can separate the hypotheses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class BoundaryQuery:
    """A point on the phase plane: beta in (1/2, 1), xi in [0, 2]."""

    beta: float
    xi: float = 0.0

    def __post_init__(self):
        if not 0.5 < self.beta < 1.0:
            raise ValueError(f"beta must be in (1/2, 1), got {self.beta}")
        if not 0.0 <= self.xi <= 2.0:
            raise ValueError(f"xi must be in [0, 2], got {self.xi}")


def rho_mean(beta: float) -> float:
    """max(0, beta - 1/2) for beta <= 3/4, else (1 - sqrt(1 - beta))^2."""
    if not 0.0 < beta < 1.0:
        raise ValueError(f"beta must be in (0, 1), got {beta}")
    if beta <= 0.75:
        return max(0.0, beta - 0.5)
    return (1.0 - math.sqrt(1.0 - beta)) ** 2


def rho_star(beta: float, xi: float = 0.0) -> float:
    """Three-piece boundary, continuous at beta = 5/8 - xi/16 and 3/4:

      (sqrt(4 - 2 xi) - sqrt(6 - 8 beta - xi))^2 / 8   on (1/2, 5/8 - xi/16]
      beta - 1/2                                        on (5/8 - xi/16, 3/4]
      (1 - sqrt(1 - beta))^2                            on (3/4, 1)
    """
    BoundaryQuery(beta, xi)
    if beta <= 0.625 - xi / 16.0:
        return (math.sqrt(4.0 - 2.0 * xi) - math.sqrt(6.0 - 8.0 * beta - xi)) ** 2 / 8.0
    if beta <= 0.75:
        return beta - 0.5
    return (1.0 - math.sqrt(1.0 - beta)) ** 2


def standardized_signal(r0: float, kappa: float, theta1: float, theta2: float) -> float:
    """r = r0 / {(1 - kappa) theta1 + kappa theta2}, the raw strength scaled
    by the mixture of entry variances; kappa is the limit of n1/(n1+n2)."""
    if not 0.0 < kappa < 1.0:
        raise ValueError(f"kappa must be in (0, 1), got {kappa}")
    if theta1 <= 0.0 or theta2 <= 0.0:
        raise ValueError(f"entry variances must be > 0, got {theta1}, {theta2}")
    return r0 / ((1.0 - kappa) * theta1 + kappa * theta2)


def gaussian_theta(sigma: np.ndarray) -> np.ndarray:
    """Gaussian entry variances theta_ij = sigma_ii sigma_jj + sigma_ij^2."""
    d = np.diag(sigma)
    return d[:, None] * d[None, :] + sigma * sigma


def signal_range(
    sigma1: np.ndarray, sigma2: np.ndarray, n1: int, n2: int
) -> tuple[float, float]:
    """(max, min) standardized strength over the support of Sigma1 - Sigma2.

    Raw strengths invert delta_ij = sqrt(4 r0 log p / n_eff); the Gaussian
    plug-in supplies theta, and kappa = n1/(n1+n2).  Returns (0.0, 0.0) when
    the difference is identically zero.
    """
    sigma1 = np.asarray(sigma1, dtype=np.float64)
    sigma2 = np.asarray(sigma2, dtype=np.float64)
    p = sigma1.shape[0]
    n_eff = n1 * n2 / (n1 + n2)
    kappa = n1 / (n1 + n2)
    delta = sigma1 - sigma2
    iu = np.triu_indices(p)
    support = np.abs(delta[iu]) > 0.0
    if not np.any(support):
        return 0.0, 0.0
    r0 = n_eff * delta[iu][support] ** 2 / (4.0 * math.log(p))
    t1 = gaussian_theta(sigma1)[iu][support]
    t2 = gaussian_theta(sigma2)[iu][support]
    r = r0 / ((1.0 - kappa) * t1 + kappa * t2)
    return float(np.max(r)), float(np.min(r))


def phase_table(xis, beta_grid) -> list[dict]:
    """Long-form rows (xi, beta, rho_star, rho_mean) for plotting the
    phase diagram; one row per (xi, beta) combination."""
    rows = []
    for xi in xis:
        for beta in beta_grid:
            rows.append(
                {
                    "xi": float(xi),
                    "beta": float(beta),
                    "rho_star": rho_star(float(beta), float(xi)),
                    "rho_mean": rho_mean(float(beta)),
                }
            )
    return rows
