"""Optimality and convergence diagnostics for point configurations.

Covers first-order optimality residuals (per-particle potentials equalize
at a minimizer, and exceed the energy off the support), a finite-scale
concentration/vanishing/dichotomy classifier, a bounded-Lipschitz distance
surrogate, and the discrete-to-continuum trace that tracks quantized and
minimized energies against the continuum value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .energy import (
    Configuration,
    continuum_energy_mc,
    discrete_energy,
    pair_distance_stats,
    potential_grid,
)
from .errors import ValidationError
from .kernels import Kernel
from .measures import TargetMeasure
from .minimizer import InitSpec, MinimizeSettings, minimize
from .quantizer import quantize

_BLOCK = 512


# ---------------------------------------------------------------------------
# Euler-Lagrange residuals
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProbeScheme:
    """Probe points on spheres around the configuration, used to test that
    the potential off the support does not dip below the energy."""

    radius_factors: Tuple[float, ...] = (1.5, 2.0, 4.0)
    count_per_radius: int = 32
    seed: int = 0

    def describe(self) -> str:
        return (f"{self.count_per_radius} probes per sphere at "
                f"{list(self.radius_factors)} x configuration radius, seed {self.seed}")


@dataclass
class ELReport:
    mean_potential: float
    potential_spread: float
    exterior_min_gap: float
    probe_scheme: str
    particle_potentials: np.ndarray = field(repr=False, default=None)

    def as_dict(self) -> dict:
        return {
            "mean_potential": self.mean_potential,
            "potential_spread": self.potential_spread,
            "exterior_min_gap": self.exterior_min_gap,
            "probe_scheme": self.probe_scheme,
        }


def el_residual(cfg: Configuration, kernel: Kernel,
                probes: Optional[ProbeScheme] = None) -> ELReport:
    """Per-particle self-excluded potentials and their spread.

    Their mean equals the discrete energy exactly; at a minimizer the
    spread shrinks as the discrete first-order conditions equalize the
    potentials.  Probe points on spheres around the cloud report the
    smallest exterior gap potential(probe) - energy.
    """
    probes = probes or ProbeScheme()
    if kernel.dim != cfg.dim:
        raise ValidationError("kernel and configuration dimensions differ")
    pts = cfg.points
    n = cfg.n
    psi = np.empty(n)
    for start in range(0, n, _BLOCK):
        chunk = pts[start:start + _BLOCK]
        d = np.linalg.norm(chunk[:, None, :] - pts[None, :, :], axis=2)
        rows = np.arange(len(chunk))
        cols = np.arange(start, start + len(chunk))
        d[rows, cols] = 1.0
        vals = np.asarray(kernel.radial(d), dtype=float)
        vals[rows, cols] = 0.0
        psi[start:start + len(chunk)] = vals.sum(axis=1)
    psi /= n
    mean = float(psi.mean())
    spread = float(psi.max() - psi.min()) if n > 0 else 0.0

    center = pts.mean(axis=0)
    radius = float(np.linalg.norm(pts - center, axis=1).max())
    radius = max(radius, 1e-9)
    rng = np.random.default_rng(probes.seed)
    gap = math.inf
    for factor in probes.radius_factors:
        direction = rng.normal(size=(probes.count_per_radius, cfg.dim))
        direction /= np.linalg.norm(direction, axis=1, keepdims=True)
        sites = center[None, :] + factor * radius * direction
        values = potential_grid(pts, 1.0 / n, kernel, sites)
        gap = min(gap, float(np.min(values) - mean))
    return ELReport(mean_potential=mean, potential_spread=spread,
                    exterior_min_gap=gap, probe_scheme=probes.describe(),
                    particle_potentials=psi)


# ---------------------------------------------------------------------------
# concentration-compactness classifier
# ---------------------------------------------------------------------------


@dataclass
class ClusterInfo:
    indices: np.ndarray
    mass_fraction: float
    center: np.ndarray
    radius: float


@dataclass
class ClusterReport:
    classification: str
    clusters: List[ClusterInfo]
    largest_fraction: float
    gap: float
    median_nn_distance: float
    link_threshold: float
    max_ball_mass: float
    ball_radius: float

    def as_dict(self) -> dict:
        return {
            "classification": self.classification,
            "largest_fraction": self.largest_fraction,
            "gap": self.gap,
            "median_nn_distance": self.median_nn_distance,
            "link_threshold": self.link_threshold,
            "max_ball_mass": self.max_ball_mass,
            "ball_radius": self.ball_radius,
            "clusters": [
                {
                    "size": int(len(c.indices)),
                    "mass_fraction": c.mass_fraction,
                    "center": c.center.tolist(),
                    "radius": c.radius,
                }
                for c in self.clusters
            ],
        }


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, i: int) -> int:
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i

    def union(self, i: int, j: int):
        ri, rj = self.find(i), self.find(j)
        if ri != rj:
            self.parent[max(ri, rj)] = min(ri, rj)


def cluster_classify(cfg: Configuration, gap_factor: float = 5.0) -> ClusterReport:
    """Single-linkage clusters at threshold gap_factor x median nearest-
    neighbor distance, classified into one of three finite-scale labels:

    * compactness: the largest cluster holds at least 99% of the mass;
    * dichotomy-like: at least two clusters hold >= 5% each and the
      inter-cluster gap exceeds 10x the largest cluster radius;
    * vanishing-like otherwise: mass neither concentrates nor splits into
      few chunks.  The max mass found in any point-centered ball of half
      the smallest positive neighbor distance is reported as the spreading
      statistic behind the label.
    """
    if gap_factor <= 1.0:
        raise ValidationError("gap_factor must exceed 1")
    pts = cfg.points
    n = cfg.n
    if n == 1:
        cluster = ClusterInfo(indices=np.array([0]), mass_fraction=1.0,
                              center=pts[0].copy(), radius=0.0)
        return ClusterReport("compactness", [cluster], 1.0, math.inf, 0.0, 0.0, 1.0, 0.0)

    dists = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=2)
    off = dists + np.diag(np.full(n, math.inf))
    nn = off.min(axis=1)
    median_nn = float(np.median(nn))
    threshold = gap_factor * median_nn

    uf = _UnionFind(n)
    for i in range(n - 1):
        for j in np.nonzero(off[i, i + 1:] <= threshold)[0]:
            uf.union(i, int(i + 1 + j))
    labels = np.array([uf.find(i) for i in range(n)])

    clusters: List[ClusterInfo] = []
    for root in sorted(set(labels.tolist())):
        idx = np.nonzero(labels == root)[0]
        center = pts[idx].mean(axis=0)
        radius = float(np.linalg.norm(pts[idx] - center, axis=1).max())
        clusters.append(ClusterInfo(indices=idx, mass_fraction=len(idx) / n,
                                    center=center, radius=radius))
    clusters.sort(key=lambda c: (-c.mass_fraction, c.indices[0]))
    largest = clusters[0].mass_fraction

    gap = math.inf
    if len(clusters) > 1:
        for a in range(len(clusters)):
            for b in range(a + 1, len(clusters)):
                gap = min(gap, float(off[np.ix_(clusters[a].indices,
                                                clusters[b].indices)].min()))

    positive_nn = nn[nn > 0]
    ball_radius = 0.5 * float(positive_nn.min()) if positive_nn.size else 0.0
    ball_counts = (dists <= ball_radius).sum(axis=1)
    max_ball_mass = float(ball_counts.max()) / n

    if largest >= 0.99:
        label = "compactness"
    else:
        heavy = [c for c in clusters if c.mass_fraction >= 0.05]
        max_radius = max(c.radius for c in clusters)
        if len(heavy) >= 2 and gap > 10.0 * max_radius:
            label = "dichotomy-like"
        else:
            label = "vanishing-like"
    return ClusterReport(classification=label, clusters=clusters,
                         largest_fraction=largest, gap=gap,
                         median_nn_distance=median_nn, link_threshold=threshold,
                         max_ball_mass=max_ball_mass, ball_radius=ball_radius)


# ---------------------------------------------------------------------------
# bounded-Lipschitz distance surrogate
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BLScheme:
    slices: int = 64
    measure_points: int = 16384
    seed: int = 0


def _as_atoms(obj, scheme: BLScheme):
    if isinstance(obj, Configuration):
        n = obj.n
        return obj.points, np.full(n, 1.0 / n)
    if isinstance(obj, TargetMeasure):
        return obj.discretize(scheme.measure_points)
    raise ValidationError("bl_distance arguments must be configurations or target measures")


def _w1_truncated_1d(x1: np.ndarray, w1: np.ndarray,
                     x2: np.ndarray, w2: np.ndarray) -> float:
    """min(W1, 2) between two weighted atom lists on the line, from the
    exact integral of the CDF difference."""
    xs = np.concatenate([x1, x2])
    signs = np.concatenate([w1, -w2])
    order = np.argsort(xs, kind="stable")
    xs = xs[order]
    cdf_diff = np.cumsum(signs[order])
    w1_dist = float(np.sum(np.abs(cdf_diff[:-1]) * np.diff(xs)))
    return min(w1_dist, 2.0)


def bl_distance(a, b, scheme: Optional[BLScheme] = None) -> float:
    """Bounded-Lipschitz distance surrogate between configurations and/or
    target measures.

    In one dimension this is the exact truncated-W1 value min(W1, 2)
    computed from CDFs (it coincides with the bounded-Lipschitz distance
    for pairs of atoms and metrizes the same convergence).  In higher
    dimension it is sliced: random unit directions, the exact 1-d value per
    slice, averaged.  Measures enter through a deterministic equal-mass
    discretization, so the estimate is reproducible for a fixed scheme.
    """
    scheme = scheme or BLScheme()
    pts_a, w_a = _as_atoms(a, scheme)
    pts_b, w_b = _as_atoms(b, scheme)
    if pts_a.shape[1] != pts_b.shape[1]:
        raise ValidationError("dimension mismatch")
    dim = pts_a.shape[1]
    if dim == 1:
        return _w1_truncated_1d(pts_a[:, 0], w_a, pts_b[:, 0], w_b)
    rng = np.random.default_rng(scheme.seed)
    total = 0.0
    for _ in range(scheme.slices):
        u = rng.normal(size=dim)
        u /= np.linalg.norm(u)
        total += _w1_truncated_1d(pts_a @ u, w_a, pts_b @ u, w_b)
    return total / scheme.slices


def support_diameter(cfg: Configuration) -> float:
    """Largest pairwise distance (0 for a single point)."""
    _, hi = pair_distance_stats(cfg.points)
    return hi


# ---------------------------------------------------------------------------
# discrete-to-continuum trace
# ---------------------------------------------------------------------------


@dataclass
class TraceRow:
    n: int
    energy_quantized: float
    energy_minimized: Optional[float]
    bl_distance: float
    diameter: float


@dataclass
class GammaTrace:
    rows: List[TraceRow]
    target_energy: float
    target_std_error: float
    ell_p_estimate: Optional[float]

    def as_dict(self) -> dict:
        return {
            "target_energy": self.target_energy,
            "target_std_error": self.target_std_error,
            "ell_p_estimate": self.ell_p_estimate,
            "rows": [
                {
                    "n": r.n,
                    "energy_quantized": r.energy_quantized,
                    "energy_minimized": r.energy_minimized,
                    "bl_distance": r.bl_distance,
                    "diameter": r.diameter,
                }
                for r in self.rows
            ],
        }


def gamma_trace(kernel: Kernel, mu: TargetMeasure, n_list: Sequence[int],
                with_minimization: bool = False,
                strategy: str = "hybrid", draws: int = 32, seed: int = 0,
                minimize_settings: Optional[MinimizeSettings] = None,
                bl_scheme: Optional[BLScheme] = None,
                mc_samples: int = 200_000) -> GammaTrace:
    """Quantize the measure along n_list and track energy and distance.

    Each row records the quantized energy, the distance to the target, the
    support diameter, and optionally the minimized energy warm-started from
    the quantized configuration (so row-wise minimized <= quantized).  The
    continuum target energy is estimated by Monte Carlo; the last minimized
    energy doubles as the limiting ground-state estimate.
    """
    n_list = list(n_list)
    if not n_list:
        raise ValidationError("n_list must not be empty")
    bl_scheme = bl_scheme or BLScheme()
    rows: List[TraceRow] = []
    for n in n_list:
        qr = quantize(mu, n, kernel, strategy=strategy, k=draws, seed=seed)
        e_q = discrete_energy(qr.config, kernel).value
        dist = bl_distance(qr.config, mu, bl_scheme)
        diam = support_diameter(qr.config)
        e_m = None
        if with_minimization:
            settings = minimize_settings or MinimizeSettings(restarts=4, seed=seed)
            settings = replace(settings,
                               init=InitSpec(kind="user", config=qr.config))
            e_m = minimize(kernel, n, mu.dim, settings).energy
        rows.append(TraceRow(n=n, energy_quantized=e_q, energy_minimized=e_m,
                             bl_distance=dist, diameter=diam))
    mc = continuum_energy_mc(mu, kernel, mc_samples, seed)
    ell_p = rows[-1].energy_minimized if with_minimization else None
    return GammaTrace(rows=rows, target_energy=mc.estimate,
                      target_std_error=mc.std_error, ell_p_estimate=ell_p)
