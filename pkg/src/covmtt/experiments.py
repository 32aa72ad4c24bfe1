"""Monte Carlo orchestration: empirical size tables and power curves.

Replicate b of a run draws its data from a stream derived from
(master_seed, namespace, b); size-adjustment null replicates live in a
disjoint namespace from power replicates, and each replicate's bootstrap
seed in a third, so no stream is ever reused.  Aggregation counts
rejections, which makes results independent of worker scheduling; BLAS is
pinned to one thread inside the loops so the `threads` knob cannot change
floating-point results.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace

import numpy as np
from joblib import Parallel, delayed, parallel_config
from threadpoolctl import threadpool_limits

from .bootstrap import pd_pooled_covariance
from .grids import diff_grid
from .mtt import ThresholdParams, mtt_critical_value, mtt_scan
from .rivals import clx_statistic, lc_test_statistic
from .simulate import (
    DesignSpec,
    SignalSpec,
    _innovations,
    _sym_sqrt,
    build_signal_u,
    build_sigma_base,
    design_permutation,
    epsilon_c,
)

_METHODS = ("mtt", "mtt_bt", "clx", "lc")
_STAT_KEY = {"mtt": "v_n", "mtt_bt": "v_n", "clx": "clx", "lc": "lc"}

# seed-derivation namespaces (spawn-key prefixes off master_seed)
_NS_DATA = 0   # main replicate data
_NS_NULL = 1   # size-adjustment null replicates
_NS_BOOT = 2   # per-replicate bootstrap seeds
_NS_D0 = 100   # fixed diagonal scaling
_NS_PERM = 101  # fixed permutation


def p_from_rule(n1: int) -> int:
    """Dimension preset p = floor(0.25 * n1**1.6)."""
    if n1 < 2:
        raise ValueError(f"n1 must be >= 2, got {n1}")
    return int(math.floor(0.25 * n1 ** 1.6))


@dataclass(frozen=True)
class SimConfig:
    """One experiment cell; beta/r are only needed for power runs.

    alpha = 0 is a never-reject sentinel for plumbing tests.
    """

    design: int = 1
    dist: str = "gaussian"
    n1: int = 60
    n2: int = 60
    p: int = 175
    beta: float | None = None
    r: float | None = None
    reps: int = 500
    B: int = 250
    alpha: float = 0.05
    methods: tuple = _METHODS
    master_seed: int = 0
    size_adjust: bool = False
    s0: float = 0.5
    eta: float = 0.05
    threads: int = 1

    def __post_init__(self):
        object.__setattr__(self, "methods", tuple(self.methods))
        if self.reps < 1:
            raise ValueError(f"reps must be >= 1, got {self.reps}")
        if self.B < 1:
            raise ValueError(f"B must be >= 1, got {self.B}")
        if not 0.0 <= self.alpha < 1.0:
            raise ValueError(f"alpha must be in [0, 1), got {self.alpha}")
        unknown = set(self.methods) - set(_METHODS)
        if unknown:
            raise ValueError(f"unknown methods: {sorted(unknown)}")
        if not self.methods:
            raise ValueError("methods must be nonempty")
        if self.dist not in ("gaussian", "gamma"):
            raise ValueError(f"dist must be gaussian or gamma, got {self.dist!r}")
        if self.n1 < 4 or self.n2 < 4:
            raise ValueError(f"need n1, n2 >= 4, got {self.n1}, {self.n2}")
        # construct eagerly so bad s0/eta fail here, not mid-run
        ThresholdParams(s0=self.s0, eta=self.eta)

    @property
    def n_eff(self) -> float:
        return self.n1 * self.n2 / (self.n1 + self.n2)

    @property
    def threshold_params(self) -> ThresholdParams:
        # alpha is applied at the decision layer (may be the 0 sentinel)
        return ThresholdParams(s0=self.s0, eta=self.eta)


@dataclass(frozen=True)
class SimResult:
    rates: dict
    ses: dict
    reps: int
    runtime: float
    config: SimConfig


def _derived_seed(master_seed, *key) -> int:
    ss = np.random.SeedSequence(master_seed, spawn_key=key)
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class _Plan:
    """Per-experiment precomputation: permuted covariance square roots."""

    root1p: np.ndarray
    root2p: np.ndarray


def _build_plan(config: SimConfig, alternative: bool) -> _Plan:
    spec = DesignSpec(
        design=config.design,
        p=config.p,
        d0_seed=_derived_seed(config.master_seed, _NS_D0),
        perm_seed=_derived_seed(config.master_seed, _NS_PERM),
    )
    base = build_sigma_base(spec)
    perm = design_permutation(spec)
    if alternative:
        sig = SignalSpec(beta=config.beta, r=config.r, n_eff=config.n_eff)
        u = build_signal_u(config.p, sig)
        eps = epsilon_c(base + u)
        eye = np.eye(config.p)
        root1 = _sym_sqrt(base + eps * eye)
        root2 = _sym_sqrt(base + u + eps * eye)
    else:
        root1 = root2 = _sym_sqrt(base)
    return _Plan(root1p=root1[:, perm], root2p=root2[:, perm])


def _draw(plan: _Plan, config: SimConfig, namespace: int, b: int):
    ss = np.random.SeedSequence(config.master_seed, spawn_key=(namespace, b))
    rng = np.random.Generator(np.random.Philox(ss))
    z1 = _innovations(rng, config.n1, config.p, config.dist)
    z2 = _innovations(rng, config.n2, config.p, config.dist)
    return z1 @ plan.root1p, z2 @ plan.root2p


def _statistics_replicate(plan, config, namespace, b):
    x, y = _draw(plan, config, namespace, b)
    methods = set(config.methods)
    out = {}
    if methods & {"mtt", "mtt_bt", "clx"}:
        grid = diff_grid(x, y)
        if methods & {"mtt", "mtt_bt"}:
            out["v_n"] = mtt_scan(grid, config.threshold_params).v_n
        if "clx" in methods:
            out["clx"] = clx_statistic(grid)
    if "lc" in methods:
        out["lc"] = lc_test_statistic(x, y)
    return out


def _decision_replicate(plan, config, crit_mtt, b):
    """Full test decisions for one replicate; bootstrap-calibrated methods
    share one resampling pass."""
    x, y = _draw(plan, config, _NS_DATA, b)
    methods = set(config.methods)
    params = config.threshold_params
    rejects = {}
    grid = v_n = clx_obs = lc_obs = None
    if methods & {"mtt", "mtt_bt", "clx"}:
        grid = diff_grid(x, y)
    if methods & {"mtt", "mtt_bt"}:
        v_n = mtt_scan(grid, params).v_n
    if "mtt" in methods:
        rejects["mtt"] = bool(v_n > crit_mtt)
    if "clx" in methods:
        clx_obs = clx_statistic(grid)
    if "lc" in methods:
        lc_obs = lc_test_statistic(x, y)

    boot_methods = [m for m in ("mtt_bt", "clx", "lc") if m in methods]
    if boot_methods:
        est = pd_pooled_covariance(x, y)
        bseed = _derived_seed(config.master_seed, _NS_BOOT, b)
        counts = dict.fromkeys(boot_methods, 0)
        ntot = config.n1 + config.n2
        for bb in range(config.B):
            rng = np.random.Generator(
                np.random.Philox(np.random.SeedSequence(bseed, spawn_key=(bb,)))
            )
            xy = rng.standard_normal((ntot, config.p)) @ est.chol.T
            xs, ys = xy[: config.n1], xy[config.n1 :]
            bgrid = None
            if "mtt_bt" in counts or "clx" in counts:
                bgrid = diff_grid(xs, ys)
            if "mtt_bt" in counts and mtt_scan(bgrid, params).v_n > v_n:
                counts["mtt_bt"] += 1
            if "clx" in counts and clx_statistic(bgrid) > clx_obs:
                counts["clx"] += 1
            if "lc" in counts and lc_test_statistic(xs, ys) > lc_obs:
                counts["lc"] += 1
        for m in boot_methods:
            rejects[m] = bool(counts[m] / config.B < config.alpha)
    return rejects


def _map_replicates(fn, config, reps):
    if config.threads == 1:
        with threadpool_limits(limits=1):
            return [fn(b) for b in range(reps)]
    n_jobs = -1 if config.threads == 0 else config.threads
    with parallel_config(backend="loky", inner_max_num_threads=1):
        return Parallel(n_jobs=n_jobs)(delayed(fn)(b) for b in range(reps))


def _asymptotic_critical(config: SimConfig) -> float:
    if config.alpha == 0.0:
        return math.inf
    return mtt_critical_value(
        config.p, ThresholdParams(s0=config.s0, eta=config.eta, alpha=config.alpha)
    )


def _summarize(counts, config, t0):
    rates = {m: counts[m] / config.reps for m in config.methods}
    ses = {m: math.sqrt(rates[m] * (1.0 - rates[m]) / config.reps) for m in config.methods}
    return SimResult(
        rates=rates,
        ses=ses,
        reps=config.reps,
        runtime=time.perf_counter() - t0,
        config=config,
    )


def run_size(config: SimConfig) -> SimResult:
    """Empirical sizes: null pairs, full test decisions at level alpha."""
    t0 = time.perf_counter()
    plan = _build_plan(config, alternative=False)
    crit_mtt = _asymptotic_critical(config) if "mtt" in config.methods else None
    rows = _map_replicates(
        lambda b: _decision_replicate(plan, config, crit_mtt, b), config, config.reps
    )
    counts = {m: sum(r[m] for r in rows) for m in config.methods}
    return _summarize(counts, config, t0)


def _null_statistic_arrays(config: SimConfig) -> dict:
    plan = _build_plan(config, alternative=False)
    rows = _map_replicates(
        lambda b: _statistics_replicate(plan, config, _NS_NULL, b), config, config.reps
    )
    return {k: np.array([r[k] for r in rows]) for k in rows[0]}


def size_adjusted_critical(method: str, config: SimConfig) -> float:
    """Empirical upper-alpha quantile of the method's statistic under the
    matched null data-generating process (reps >= 100 required)."""
    if method not in _METHODS:
        raise ValueError(f"unknown method {method!r}")
    if config.reps < 100:
        raise ValueError(f"need reps >= 100 for quantile calibration, got {config.reps}")
    nulls = _null_statistic_arrays(replace(config, methods=(method,)))
    return float(np.quantile(nulls[_STAT_KEY[method]], 1.0 - config.alpha))


def run_power(config: SimConfig) -> SimResult:
    """Empirical powers under the sparse-signal alternative.

    With size_adjust, each method's critical value is first recalibrated to
    the empirical upper-alpha null quantile of its own statistic (null
    replicates drawn from a disjoint stream namespace), then power is the
    share of alternative replicates whose statistic exceeds it.  The scan
    statistic is shared by mtt and mtt_bt, so their adjusted powers agree.
    """
    if config.beta is None or config.r is None:
        raise ValueError("power runs need beta and r")
    t0 = time.perf_counter()
    plan = _build_plan(config, alternative=True)
    if config.size_adjust:
        nulls = _null_statistic_arrays(config)
        crits = {
            m: float(np.quantile(nulls[_STAT_KEY[m]], 1.0 - config.alpha))
            for m in config.methods
        }
        rows = _map_replicates(
            lambda b: _statistics_replicate(plan, config, _NS_DATA, b),
            config,
            config.reps,
        )
        counts = {
            m: sum(r[_STAT_KEY[m]] > crits[m] for r in rows) for m in config.methods
        }
    else:
        crit_mtt = _asymptotic_critical(config) if "mtt" in config.methods else None
        rows = _map_replicates(
            lambda b: _decision_replicate(plan, config, crit_mtt, b),
            config,
            config.reps,
        )
        counts = {m: sum(r[m] for r in rows) for m in config.methods}
    return _summarize(counts, config, t0)
