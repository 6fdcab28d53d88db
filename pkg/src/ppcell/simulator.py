"""Monte Carlo reference for the downlink coverage and rate formulas.

Each realization drops exactly n_bs_target base stations uniformly on a disc
whose radius is chosen so the empirical density equals lambda_bs, plus a
Poisson number of users. The tagged user sits at the origin and attaches to
the nearest base station. Idle mode switches off every base station that
serves no sampled user (the serving one always stays on).

Determinism contract: realization rid consumes two independent generator
lanes, default_rng([seed, rid, 0]) for geometry and [seed, rid, 1] for
fading, so results are bitwise identical for any jobs count and any subset
of realizations. Draw order within a lane is fixed: geometry draws BS radii,
BS angles, user count, user radii, user angles; fading draws the serving
gain first, then interferer marks when enabled.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .analytics import RateMethod, RateResult
from .mgf import NetworkParams

__all__ = [
    "Deployment",
    "SimConfig",
    "SirSampleSet",
    "apply_idle_mode",
    "estimate_coverage",
    "estimate_rates",
    "inactive_fraction_interior",
    "run_simulation",
    "sample_deployment",
    "sample_sir",
]

_MIN_RATE_SAMPLES = 100


@dataclass(frozen=True)
class SimConfig:
    """Simulation protocol knobs.

    rayleigh_on_serving draws an Exp(1) power gain on the serving link;
    fading_on_interferers adds independent Exp(1) marks on every interferer,
    matching the marked-process MGF variant.
    """

    n_bs_target: int = 500
    n_realizations: int = 10000
    seed: int = 0
    rayleigh_on_serving: bool = True
    fading_on_interferers: bool = False

    def __post_init__(self) -> None:
        if self.n_bs_target < 50:
            raise ValueError(f"n_bs_target must be at least 50, got {self.n_bs_target}")
        if self.n_realizations < 1:
            raise ValueError(f"n_realizations must be positive, got {self.n_realizations}")
        if self.seed < 0:
            raise ValueError(f"seed must be nonnegative, got {self.seed}")


@dataclass(frozen=True, eq=False)
class Deployment:
    """One sampled network: positions in the plane, origin = tagged user."""

    bs_positions: np.ndarray
    ue_positions: np.ndarray
    active_mask: np.ndarray
    serving_index: int
    window_radius: float


@dataclass(frozen=True, eq=False)
class SirSampleSet:
    """Per-realization SIR draws plus the cell loads needed for rate shares."""

    sir_values: np.ndarray
    n_users_in_cell: np.ndarray
    n_active_bs: np.ndarray
    realization_ids: np.ndarray

    def __post_init__(self) -> None:
        n = self.sir_values.size
        for name in ("n_users_in_cell", "n_active_bs", "realization_ids"):
            if getattr(self, name).size != n:
                raise ValueError(f"{name} length mismatch with sir_values ({n})")

    @property
    def rate_peak_samples(self) -> np.ndarray:
        return np.log1p(self.sir_values)

    @property
    def rate_actual_samples(self) -> np.ndarray:
        return self.rate_peak_samples / self.n_users_in_cell

    @property
    def no_interference_fraction(self) -> float:
        return float(np.mean(np.isinf(self.sir_values)))


def _lane_rng(seed: int, rid: int, lane: int) -> np.random.Generator:
    return np.random.default_rng([seed, rid, lane])


def _uniform_disc(rng: np.random.Generator, n: int, radius: float) -> np.ndarray:
    r = radius * np.sqrt(rng.random(n))
    theta = 2.0 * math.pi * rng.random(n)
    return np.column_stack((r * np.cos(theta), r * np.sin(theta)))


def sample_deployment(p: NetworkParams, cfg: SimConfig, rid: int) -> Deployment:
    """Draw geometry for realization rid (lane 0 of the seed tree)."""
    rng = _lane_rng(cfg.seed, rid, 0)
    radius = math.sqrt(cfg.n_bs_target / (math.pi * p.lambda_bs))
    bs = _uniform_disc(rng, cfg.n_bs_target, radius)
    if p.lambda_ue > 0.0:
        n_ue = int(rng.poisson(p.lambda_ue * math.pi * radius * radius))
    else:
        n_ue = 0
    ue = _uniform_disc(rng, n_ue, radius)
    serving = int(np.argmin(np.einsum("ij,ij->i", bs, bs)))
    return Deployment(
        bs_positions=bs,
        ue_positions=ue,
        active_mask=np.ones(cfg.n_bs_target, dtype=bool),
        serving_index=serving,
        window_radius=radius,
    )


def _ue_assignments(d: Deployment) -> np.ndarray:
    """Nearest-BS index for every sampled user (empty array when no users)."""
    if d.ue_positions.shape[0] == 0:
        return np.zeros(0, dtype=np.int64)
    _, idx = cKDTree(d.bs_positions).query(d.ue_positions)
    return np.asarray(idx, dtype=np.int64)


def apply_idle_mode(d: Deployment, assignments: np.ndarray | None = None) -> Deployment:
    """Switch off base stations with no attached user; the serving one stays on."""
    if assignments is None:
        assignments = _ue_assignments(d)
    mask = np.zeros(d.bs_positions.shape[0], dtype=bool)
    mask[assignments] = True
    mask[d.serving_index] = True
    return Deployment(
        bs_positions=d.bs_positions,
        ue_positions=d.ue_positions,
        active_mask=mask,
        serving_index=d.serving_index,
        window_radius=d.window_radius,
    )


def sample_sir(d: Deployment, p: NetworkParams, cfg: SimConfig, rng: np.random.Generator) -> float:
    """SIR (or SINR when sigma_n2 > 0) at the origin for one deployment.

    Returns inf when nothing interferes and there is no noise; callers count
    that as covered and keep it out of rate averages.
    """
    sq = np.einsum("ij,ij->i", d.bs_positions, d.bs_positions)
    loss = p.kappa * sq ** (p.beta / 2.0)
    signal_gain = float(rng.exponential()) if cfg.rayleigh_on_serving else 1.0
    signal = p.p_tx * signal_gain / loss[d.serving_index]
    interferer = d.active_mask.copy()
    interferer[d.serving_index] = False
    loss_i = loss[interferer]
    if cfg.fading_on_interferers and loss_i.size:
        marks = rng.exponential(size=loss_i.size)
    else:
        marks = 1.0
    denom = float(np.sum(p.p_tx * marks / loss_i)) + p.sigma_n2
    if denom == 0.0:
        return math.inf
    return signal / denom


def _simulate_block(args: tuple[NetworkParams, SimConfig, bool, int, int]) -> tuple[list, list, list, list]:
    p, cfg, idle_mode, rid_lo, rid_hi = args
    sirs: list[float] = []
    users: list[int] = []
    active: list[int] = []
    rids: list[int] = []
    track_users = idle_mode or p.lambda_ue > 0.0
    for rid in range(rid_lo, rid_hi):
        d = sample_deployment(p, cfg, rid)
        if track_users:
            assignments = _ue_assignments(d)
            n_users = int(np.count_nonzero(assignments == d.serving_index)) + 1
        else:
            assignments = None
            n_users = 1
        if idle_mode:
            d = apply_idle_mode(d, assignments)
        fading = _lane_rng(cfg.seed, rid, 1)
        sirs.append(sample_sir(d, p, cfg, fading))
        users.append(n_users)
        active.append(int(np.count_nonzero(d.active_mask)))
        rids.append(rid)
    return sirs, users, active, rids


def run_simulation(
    p: NetworkParams,
    cfg: SimConfig,
    idle_mode: bool = False,
    jobs: int = 1,
) -> SirSampleSet:
    """Run cfg.n_realizations independent drops; output is jobs-invariant.

    The tagged user at the origin is extra (not one of the sampled users) and
    is counted into its own cell load, so n_users_in_cell >= 1.
    """
    if idle_mode and p.lambda_ue <= 0.0:
        raise ValueError("idle mode needs lambda_ue > 0, otherwise every interferer sleeps")
    if jobs < 1:
        raise ValueError(f"jobs must be positive, got {jobs}")
    n = cfg.n_realizations
    jobs = min(jobs, n)
    if jobs == 1:
        blocks = [_simulate_block((p, cfg, idle_mode, 0, n))]
    else:
        step = -(-n // jobs)
        tasks = [(p, cfg, idle_mode, lo, min(lo + step, n)) for lo in range(0, n, step)]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            blocks = list(pool.map(_simulate_block, tasks))
    sirs: list[float] = []
    users: list[int] = []
    active: list[int] = []
    rids: list[int] = []
    # blocks arrive in submission order = rid order; keep the reduction explicit
    for b_sirs, b_users, b_active, b_rids in blocks:
        sirs.extend(b_sirs)
        users.extend(b_users)
        active.extend(b_active)
        rids.extend(b_rids)
    order = np.argsort(np.asarray(rids, dtype=np.int64), kind="stable")
    return SirSampleSet(
        sir_values=np.asarray(sirs, dtype=np.float64)[order],
        n_users_in_cell=np.asarray(users, dtype=np.int64)[order],
        n_active_bs=np.asarray(active, dtype=np.int64)[order],
        realization_ids=np.asarray(rids, dtype=np.int64)[order],
    )


def estimate_coverage(
    samples: SirSampleSet,
    gamma_grid: tuple[float, ...] | list[float] | np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Empirical P(SIR > gamma) with binomial standard errors.

    Infinite SIR draws (no interference, no noise) exceed every threshold,
    so they count as covered.
    """
    grid = np.asarray(gamma_grid, dtype=np.float64)
    n = samples.sir_values.size
    pcov = np.array([np.count_nonzero(samples.sir_values > g) / n for g in grid])
    stderr = np.sqrt(pcov * (1.0 - pcov) / n)
    return pcov, stderr


def estimate_rates(samples: SirSampleSet) -> tuple[RateResult, RateResult]:
    """Mean peak and actual rate over realizations with finite SIR.

    Needs at least 100 samples for the standard error to mean anything. When
    every draw is infinite the no-interference sentinel is returned.
    """
    n = samples.sir_values.size
    if n < _MIN_RATE_SAMPLES:
        raise ValueError(f"need at least {_MIN_RATE_SAMPLES} realizations for rate estimates, got {n}")
    finite = np.isfinite(samples.sir_values)
    n_fin = int(np.count_nonzero(finite))
    if n_fin == 0:
        sentinel = RateResult(
            value=math.inf, method=RateMethod.MONTE_CARLO, stderr=0.0, no_interference=True
        )
        return sentinel, sentinel
    peak = samples.rate_peak_samples[finite]
    actual = samples.rate_actual_samples[finite]
    peak_res = RateResult(
        value=float(np.mean(peak)),
        method=RateMethod.MONTE_CARLO,
        stderr=float(np.std(peak, ddof=1) / math.sqrt(n_fin)) if n_fin > 1 else 0.0,
    )
    actual_res = RateResult(
        value=float(np.mean(actual)),
        method=RateMethod.MONTE_CARLO,
        stderr=float(np.std(actual, ddof=1) / math.sqrt(n_fin)) if n_fin > 1 else 0.0,
    )
    return peak_res, actual_res


def inactive_fraction_interior(d: Deployment, p: NetworkParams, margin_factor: float = 1.5) -> float:
    """Fraction of idle base stations among those away from the window edge.

    Cells near the boundary lose users to the void outside, biasing the idle
    fraction high; restricting to base stations at least margin_factor mean
    cell radii (1/sqrt(lambda_bs)) inside the edge removes that truncation
    effect. Returns nan when the margin leaves no base stations.
    """
    margin = margin_factor / math.sqrt(p.lambda_bs)
    dist = np.sqrt(np.einsum("ij,ij->i", d.bs_positions, d.bs_positions))
    interior = dist <= d.window_radius - margin
    if not np.any(interior):
        return math.nan
    return float(np.mean(~d.active_mask[interior]))
