"""Multi-start first-order minimization of the discrete pair energy.

Plain gradient descent with Armijo backtracking: the objective can be
nonsmooth along truncation boundaries, so robustness beats quasi-Newton
cleverness at desk scale.  A collision guard keeps the line search away
from coincident points when the kernel is singular at zero, and a periodic
repair move relocates far outliers onto a small grid of low-potential sites
just outside the bulk, accepted only on strict energy decrease.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

import numpy as np

from .energy import (
    Configuration,
    gradient_of_points,
    pair_interaction_sum,
    potential_grid,
)
from .errors import GradientUndefinedError, OptimizationError, ValidationError
from .kernels import Kernel
from .measures import TargetMeasure
from .quantizer import quantize


@dataclass(frozen=True)
class StepRule:
    """Backtracking line-search parameters."""

    initial: float = 1.0
    shrink: float = 0.5
    sufficient_decrease: float = 1e-4
    grow: float = 2.0
    max_backtracks: int = 60

    def __post_init__(self):
        if not (0 < self.shrink < 1 and self.initial > 0 and self.sufficient_decrease > 0):
            raise ValidationError("bad line-search parameters")


@dataclass(frozen=True)
class RepairSettings:
    """Outlier relocation move.

    Points beyond far_factor times the bulk quantile radius are replaced by
    the lowest-potential sites of a regular grid in a small cube placed just
    outside the farthest bulk point.  grid_side None sizes the cube from the
    kernel's monotone radius and the bulk radius.

    A single extreme outlier among n points drags the center of mass enough
    to sit only (n-1) times farther from it than the bulk does, so the
    defaults stay deliberately tight: median bulk radius, factor 1.5.
    """

    bulk_radius_quantile: float = 0.5
    far_factor: float = 1.5
    grid_side: Optional[float] = None
    outward_offset: float = 0.1

    def __post_init__(self):
        if not (0.0 < self.bulk_radius_quantile < 1.0):
            raise ValidationError("bulk_radius_quantile must be in (0, 1)")
        if not self.far_factor > 1.0:
            raise ValidationError("far_factor must exceed 1")
        if self.grid_side is not None and not self.grid_side > 0:
            raise ValidationError("grid_side must be positive")


@dataclass(frozen=True)
class InitSpec:
    """Restart initialization: independent gaussian clouds, the quantizer
    applied to a target measure, or a user-supplied configuration (the last
    two start restart 0 exactly there and jitter the rest)."""

    kind: str = "random-gaussian"
    scale: float = 1.0
    measure: Optional[TargetMeasure] = None
    config: Optional[Configuration] = None

    def __post_init__(self):
        if self.kind not in ("random-gaussian", "quantizer-seeded", "user"):
            raise ValidationError(f"unknown init kind {self.kind!r}")
        if self.kind == "quantizer-seeded" and self.measure is None:
            raise ValidationError("quantizer-seeded init needs a measure")
        if self.kind == "user" and self.config is None:
            raise ValidationError("user init needs a configuration")


@dataclass(frozen=True)
class MinimizeSettings:
    restarts: int = 16
    max_iters: int = 2000
    grad_tol: float = 1e-9
    init: InitSpec = field(default_factory=InitSpec)
    step: StepRule = field(default_factory=StepRule)
    repair: Optional[RepairSettings] = field(default_factory=RepairSettings)
    repair_period: int = 50
    collision_guard: float = 1e-9
    seed: int = 0

    def __post_init__(self):
        if self.restarts < 1 or self.max_iters < 1 or self.grad_tol <= 0:
            raise ValidationError("restarts, max_iters and grad_tol must be positive")


@dataclass
class MinimizeResult:
    config: Configuration
    energy: float
    grad_norm: float
    iterations: int
    restarts_used: int
    converged: bool
    history: List[Tuple[float, float]]
    repair_events: List[float]

    def as_dict(self) -> dict:
        return {
            "energy": self.energy,
            "grad_norm": self.grad_norm,
            "iterations": self.iterations,
            "restarts_used": self.restarts_used,
            "converged": self.converged,
            "repair_events": len(self.repair_events),
            "repair_energy_deltas": self.repair_events,
        }


def _energy_stats(points: np.ndarray, kernel: Kernel) -> Tuple[float, float, float]:
    total, lo, hi = pair_interaction_sum(points, kernel)
    n = len(points)
    return total / n**2, lo, hi


def _max_row_norm(g: np.ndarray) -> float:
    return float(np.sqrt((g * g).sum(axis=1).max()))


def repair_outliers(cfg: Configuration, kernel: Kernel,
                    settings: Optional[RepairSettings] = None,
                    seed: int = 0) -> Configuration:
    """Relocate far outliers onto low-potential grid sites near the bulk.

    Returns the input configuration unchanged when there are no outliers,
    when the bulk is degenerate, or when the move does not strictly decrease
    the energy.
    """
    settings = settings or RepairSettings()
    if cfg.n < 2:
        return cfg
    new_points = _repair_points(cfg.points, kernel, settings)
    if new_points is None:
        return cfg
    return Configuration(new_points)


def _repair_points(points: np.ndarray, kernel: Kernel,
                   settings: RepairSettings) -> Optional[np.ndarray]:
    n, dim = points.shape
    center = points.mean(axis=0)
    dists = np.linalg.norm(points - center, axis=1)
    radius = float(np.quantile(dists, settings.bulk_radius_quantile))
    if radius <= 0.0:
        return None  # everything coincident: nothing to anchor the move on
    outliers = dists > settings.far_factor * radius
    count = int(outliers.sum())
    if count == 0 or count == n:
        return None

    bulk = points[~outliers]
    bulk_center = bulk.mean(axis=0)
    bulk_d = np.linalg.norm(bulk - bulk_center, axis=1)
    far_idx = int(np.argmax(bulk_d))
    if bulk_d[far_idx] <= 0.0:
        anchor_dir = np.zeros(dim)
        anchor_dir[0] = 1.0
        anchor = bulk_center + radius * anchor_dir
    else:
        anchor = bulk_center + (1.0 + settings.outward_offset) * (bulk[far_idx] - bulk_center)

    side = settings.grid_side
    if side is None:
        r_bar = kernel.near_origin_radius
        cap = 0.9 * r_bar / math.sqrt(dim) if r_bar else math.inf
        side = min(cap, 0.5 * max(radius, 1e-12))

    per_axis = max(1, math.ceil(count ** (1.0 / dim)))
    offsets = (np.arange(per_axis) + 0.5) / per_axis - 0.5
    grids = np.meshgrid(*[offsets * side] * dim, indexing="ij")
    sites = anchor[None, :] + np.stack([g.reshape(-1) for g in grids], axis=1)

    psi = potential_grid(bulk, 1.0 / n, kernel, sites)
    order = np.argsort(psi, kind="stable")
    chosen = sites[order[:count]]

    candidate = points.copy()
    candidate[outliers] = chosen
    old_energy, _, _ = _energy_stats(points, kernel)
    new_energy, _, _ = _energy_stats(candidate, kernel)
    if new_energy < old_energy:
        return candidate
    return None


def _initial_points(n: int, dim: int, settings: MinimizeSettings, restart: int,
                    rng: np.random.Generator, kernel: Kernel) -> np.ndarray:
    init = settings.init
    if init.kind == "random-gaussian":
        return init.scale * rng.normal(size=(n, dim))
    if init.kind == "quantizer-seeded":
        base = quantize(init.measure, n, kernel, seed=settings.seed).config.points
    else:
        base = init.config.points
        if base.shape != (n, dim):
            raise ValidationError(
                f"user start has shape {base.shape}, expected ({n}, {dim})"
            )
    if restart == 0:
        return np.array(base, copy=True)
    spread = max(float(np.linalg.norm(base - base.mean(axis=0), axis=1).max()), 1.0)
    return base + 0.1 * spread * rng.normal(size=(n, dim))


def _descend(points: np.ndarray, kernel: Kernel, settings: MinimizeSettings,
             rng: np.random.Generator):
    """One gradient-descent run; returns (points, energy, gnorm, iters,
    converged, history, repair deltas) or None when the run broke down."""
    step_rule = settings.step
    energy, min_d, diam = _energy_stats(points, kernel)
    if not math.isfinite(energy):
        return None
    history: List[Tuple[float, float]] = []
    repair_deltas: List[float] = []
    guard_needed = kernel.singular_at_zero
    step = step_rule.initial
    gnorm = math.inf
    iters = 0
    converged = False

    for it in range(settings.max_iters):
        iters = it + 1
        if settings.repair is not None and settings.repair_period > 0 \
                and it > 0 and it % settings.repair_period == 0:
            repaired = _repair_points(points, kernel, settings.repair)
            if repaired is not None:
                new_energy, _, diam = _energy_stats(repaired, kernel)
                repair_deltas.append(new_energy - energy)
                points, energy = repaired, new_energy
        try:
            grad = gradient_of_points(points, kernel)
        except GradientUndefinedError:
            return None
        gnorm = _max_row_norm(grad)
        history.append((energy, gnorm))
        if gnorm <= settings.grad_tol:
            converged = True
            break
        gg = float((grad * grad).sum())
        t = min(step * step_rule.grow, 1e12)
        accepted = False
        for _ in range(step_rule.max_backtracks):
            trial = points - t * grad
            trial_energy, trial_min, trial_diam = _energy_stats(trial, kernel)
            ok = math.isfinite(trial_energy) and trial_min > 0.0
            if ok and guard_needed:
                ok = trial_min >= settings.collision_guard * max(diam, trial_diam)
            if ok and trial_energy <= energy - step_rule.sufficient_decrease * t * gg:
                points, energy, diam = trial, trial_energy, trial_diam
                step = t
                accepted = True
                break
            t *= step_rule.shrink
        if not accepted:
            break  # no acceptable step left at this scale
    if not converged and iters:
        # the last recorded gradient predates the final accepted step
        try:
            gnorm = _max_row_norm(gradient_of_points(points, kernel))
        except GradientUndefinedError:
            pass
    return points, energy, gnorm, iters, converged, history, repair_deltas


def minimize(kernel: Kernel, n: int, dim: int,
             settings: Optional[MinimizeSettings] = None) -> MinimizeResult:
    """Best-over-restarts gradient descent on the discrete pair energy.

    Ties between restarts break by lower gradient norm, then restart index.
    The winning configuration is translated so its center of mass sits at
    the origin, and its energy is recomputed on the final points.
    """
    settings = settings or MinimizeSettings()
    if kernel.dim != dim:
        raise ValidationError(f"kernel dimension {kernel.dim} != requested dimension {dim}")
    if n < 1:
        raise ValidationError("n must be >= 1")
    if n == 1:
        cfg = Configuration(np.zeros((1, dim)))
        return MinimizeResult(config=cfg, energy=0.0, grad_norm=0.0, iterations=0,
                              restarts_used=0, converged=True,
                              history=[(0.0, 0.0)], repair_events=[])

    rng = np.random.default_rng(settings.seed)
    streams = rng.spawn(settings.restarts)
    best = None
    best_key = None
    for restart in range(settings.restarts):
        start = _initial_points(n, dim, settings, restart, streams[restart], kernel)
        outcome = _descend(start, kernel, settings, streams[restart])
        if outcome is None:
            continue
        _, energy, gnorm, _, _, _, _ = outcome
        key = (energy, gnorm, restart)
        if best_key is None or key < best_key:
            best_key = key
            best = outcome
    if best is None:
        raise OptimizationError(
            f"all {settings.restarts} restarts diverged or hit undefined gradients"
        )
    points, energy, gnorm, iters, converged, history, repair_deltas = best
    points = points - points.mean(axis=0)
    cfg = Configuration(points)
    final_energy, _, _ = _energy_stats(cfg.points, kernel)
    return MinimizeResult(config=cfg, energy=final_energy, grad_norm=gnorm,
                          iterations=iters, restarts_used=settings.restarts,
                          converged=converged, history=history,
                          repair_events=repair_deltas)


@dataclass(frozen=True)
class TraceEntry:
    n: int
    energy: float
    grad_norm: float
    diameter: float


@dataclass
class EnergyTrace:
    entries: List[TraceEntry]
    outward_drift: bool

    def as_rows(self) -> List[Tuple[int, float, float, float]]:
        return [(e.n, e.energy, e.grad_norm, e.diameter) for e in self.entries]


def energy_trace(kernel: Kernel, dim: int, n_list,
                 settings: Optional[MinimizeSettings] = None,
                 warm_start: bool = True) -> EnergyTrace:
    """Ground-state energy estimates along an increasing list of n.

    With warm_start, each run after the first seeds one restart from the
    quantizer applied to the previous minimizer's empirical measure.  The
    outward_drift flag marks support diameters that keep growing, the
    practical symptom of discrete minimizers failing to exist.
    """
    n_list = list(n_list)
    if not n_list:
        raise ValidationError("n_list must not be empty")
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ValidationError("n_list must be strictly increasing")
    settings = settings or MinimizeSettings()
    entries: List[TraceEntry] = []
    previous: Optional[Configuration] = None
    for n in n_list:
        run_settings = settings
        if warm_start and previous is not None and previous.n >= 2:
            from .measures import AtomicMeasure

            cloud = AtomicMeasure(previous.points)
            run_settings = replace(settings, init=InitSpec(kind="quantizer-seeded",
                                                           measure=cloud))
        result = minimize(kernel, n, dim, run_settings)
        _, _, diam = _energy_stats(result.config.points, kernel)
        entries.append(TraceEntry(n=n, energy=result.energy,
                                  grad_norm=result.grad_norm, diameter=diam))
        previous = result.config
    diameters = [e.diameter for e in entries if e.diameter > 0]
    drift = bool(len(diameters) >= 2 and diameters[-1] > 3.0 * diameters[0]
                 and all(b > a for a, b in zip(diameters, diameters[1:])))
    return EnergyTrace(entries=entries, outward_drift=drift)
