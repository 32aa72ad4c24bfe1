"""Data-generating processes for the Monte Carlo studies.

Two base covariance designs (autoregressive and 4-block), a sparse banded
signal whose number of nonzero pairs is controlled by a sparsity exponent
beta and whose magnitude by a strength parameter r, Gaussian or centered
Gamma innovations, and a fixed column permutation applied to both samples.
The diagonal scaling D0 and the permutation are functions of their own seeds
so they can be held fixed across all replicates of an experiment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericError
from .grids import SampleMatrix


@dataclass(frozen=True)
class DesignSpec:
    """Base covariance design: 1 = AR(0.4^|i-j|), 2 = 4-blocks of 0.5."""

    design: int
    p: int
    d0_seed: int = 0
    perm_seed: int = 0

    def __post_init__(self):
        if self.design not in (1, 2):
            raise ValueError(f"design must be 1 or 2, got {self.design}")
        if self.p < 4:
            raise ValueError(f"p must be >= 4, got {self.p}")


@dataclass(frozen=True)
class SignalSpec:
    """Sparsity exponent beta, strength r, and the effective sample size
    entering the magnitude sqrt(4 r log p / n_eff)."""

    beta: float
    r: float
    n_eff: float

    def __post_init__(self):
        if not 0.0 < self.beta < 1.0:
            raise ValueError(f"beta must be in (0, 1), got {self.beta}")
        if self.r < 0.0:
            raise ValueError(f"r must be >= 0, got {self.r}")
        if self.n_eff <= 0.0:
            raise ValueError(f"n_eff must be > 0, got {self.n_eff}")


@dataclass(frozen=True)
class GeneratedPair:
    x: SampleMatrix
    y: SampleMatrix
    truth: str
    sigma1: np.ndarray
    sigma2: np.ndarray


def _star_matrix(spec: DesignSpec) -> np.ndarray:
    p = spec.p
    idx = np.arange(p)
    if spec.design == 1:
        return 0.4 ** np.abs(idx[:, None] - idx[None, :])
    same_block = (idx[:, None] // 4) == (idx[None, :] // 4)
    return 0.5 * np.eye(p) + 0.5 * same_block


def design_d0(spec: DesignSpec) -> np.ndarray:
    """The fixed diagonal scaling, entries Uniform(0.1, 1) from d0_seed."""
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(spec.d0_seed)))
    return rng.uniform(0.1, 1.0, spec.p)


def design_permutation(spec: DesignSpec) -> np.ndarray:
    """The fixed column permutation from perm_seed."""
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(spec.perm_seed)))
    return rng.permutation(spec.p)


def build_sigma_base(spec: DesignSpec, d0: np.ndarray | None = None) -> np.ndarray:
    """D0^(1/2) * Sigma_star * D0^(1/2); pass d0 explicitly to override the
    seeded draw (identity override makes the base equal Sigma_star)."""
    if d0 is None:
        d0 = design_d0(spec)
    root = np.sqrt(np.asarray(d0, dtype=np.float64))
    return _star_matrix(spec) * root[:, None] * root[None, :]


def signal_counts(p: int, beta: float) -> tuple[int, int, int]:
    """(m_p, k0, k1): number of nonzero upper-triangle pairs and its split
    into k0 full superdiagonals plus k1 leading entries of the next one.

    m_p = floor(q^(1-beta)/2) with q = p(p+1)/2; k0 = floor(m_p/p);
    k1 = m_p - p*k0 + k0*(k0+1)/2.
    """
    q = p * (p + 1) // 2
    m_p = int(math.floor(q ** (1.0 - beta) / 2.0))
    k0 = m_p // p
    k1 = m_p - p * k0 + k0 * (k0 + 1) // 2
    return m_p, k0, k1


def build_signal_u(p: int, sig: SignalSpec) -> np.ndarray:
    """Symmetric banded signal with m_p nonzero upper-triangle pairs, all of
    magnitude sqrt(4 r log p / n_eff).

    The first k0 superdiagonals are fully set; the (k0+1)-th gets its first
    k1 entries.
    """
    if p < 4:
        raise ValueError(f"p must be >= 4, got {p}")
    _, k0, k1 = signal_counts(p, sig.beta)
    if k0 > p - 1 or k1 > p - k0 - 1:
        raise ValueError(
            f"signal too dense for the banded placement: beta={sig.beta}, p={p}"
        )
    mag = math.sqrt(4.0 * sig.r * math.log(p) / sig.n_eff)
    u = np.zeros((p, p))
    idx = np.arange(p)
    for d in range(1, k0 + 1):
        u[idx[:-d], idx[:-d] + d] = mag
    if k1 > 0:
        rows = idx[:k1]
        u[rows, rows + k0 + 1] = mag
    return u + u.T


def epsilon_c(mat: np.ndarray) -> float:
    """|min(lambda_min, 0)| + 0.05 for a symmetric matrix."""
    try:
        w = np.linalg.eigvalsh(mat)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"eigendecomposition failed: {exc}") from exc
    return abs(min(float(w[0]), 0.0)) + 0.05


def _sym_sqrt(mat: np.ndarray) -> np.ndarray:
    try:
        w, v = np.linalg.eigh(mat)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"eigendecomposition failed: {exc}") from exc
    return (v * np.sqrt(np.maximum(w, 0.0))) @ v.T


def _innovations(rng, n, p, dist):
    if dist == "gaussian":
        return rng.standard_normal((n, p))
    if dist == "gamma":
        # shape 4, rate 2 (scale 1/2): mean 2, variance 1; center to mean 0
        return rng.gamma(4.0, 0.5, size=(n, p)) - 2.0
    raise ValueError(f"dist must be gaussian or gamma, got {dist!r}")


def generate_pair(
    spec: DesignSpec,
    sig: SignalSpec | None,
    dist: str,
    n1: int,
    n2: int,
    seed,
    base_override: np.ndarray | None = None,
) -> GeneratedPair:
    """One replicate pair of samples.

    Under the null both covariances are the base matrix.  Under the
    alternative Sigma1 = base + eps*I and Sigma2 = base + U + eps*I with
    eps = epsilon_c(base + U), so both are positive definite.  Rows are
    covariance square root times i.i.d. innovations; finally the columns of
    both samples are reordered by the fixed permutation.  ``seed`` may be an
    int or a numpy SeedSequence.  ``base_override`` replaces the seeded base
    covariance (test hook).
    """
    base = build_sigma_base(spec) if base_override is None else np.asarray(base_override)
    if sig is None:
        sigma1 = sigma2 = base
        truth = "null"
    else:
        u = build_signal_u(spec.p, sig)
        eps = epsilon_c(base + u)
        sigma1 = base + eps * np.eye(spec.p)
        sigma2 = base + u + eps * np.eye(spec.p)
        truth = "alternative"

    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    rng = np.random.Generator(np.random.Philox(seed))
    root1 = _sym_sqrt(sigma1)
    root2 = root1 if sig is None else _sym_sqrt(sigma2)
    x = _innovations(rng, n1, spec.p, dist) @ root1
    y = _innovations(rng, n2, spec.p, dist) @ root2

    perm = design_permutation(spec)
    pp = np.ix_(perm, perm)
    return GeneratedPair(
        x=SampleMatrix(x[:, perm]),
        y=SampleMatrix(y[:, perm]),
        truth=truth,
        sigma1=sigma1[pp],
        sigma2=sigma2[pp],
    )
