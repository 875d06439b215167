"""Target probability measures with the two queries the quantizer needs:
conditional axis quantiles on a rectangle, and rectangle-restricted sampling.

Two exact backends cover everything:

* weighted atom clouds, where boundary atoms are split fractionally between
  adjacent cells so restricted masses come out exact, and
* products of per-axis quantile functions, where restrictions live in
  CDF space and every quantile is a direct evaluation.

Densities on a box and uniform balls are backed by a fine-grid atom cloud
built once at construction (the grid resolution is the declared accuracy of
that surrogate); their global samplers stay exact or jittered-smooth.
"""

from __future__ import annotations

import abc
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import NumericalError, ValidationError
from .quadrature import _gauss

_FULL = (-math.inf, math.inf)


def _full_rect(dim: int) -> np.ndarray:
    return np.array([_FULL] * dim, dtype=float)


# ---------------------------------------------------------------------------
# restrictions: the recursive handles the partition splits
# ---------------------------------------------------------------------------


class Restriction(abc.ABC):
    """A measure restricted to a closed rectangle, with exact mass tracking."""

    rect: np.ndarray  # (dim, 2) closed bounds, +-inf allowed
    mass: float

    @property
    def dim(self) -> int:
        return self.rect.shape[0]

    @abc.abstractmethod
    def axis_threshold(self, axis: int, fraction: float) -> float:
        """Minimal t at which the renormalized axis-marginal CDF reaches
        ``fraction``; for atomic measures the minimum sits on an atom."""

    @abc.abstractmethod
    def split_fraction(self, axis: int, fraction: float):
        """Split at the fraction-quantile along an axis.

        Returns (left, right, threshold); the left part receives exactly
        fraction * mass, splitting boundary atoms fractionally if needed.
        """

    @abc.abstractmethod
    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        """Draw points of the restriction; always inside the closed rect."""

    @abc.abstractmethod
    def mean_point(self) -> np.ndarray:
        ...

    @abc.abstractmethod
    def median_point(self) -> np.ndarray:
        ...

    def representative(self, kind: str = "mean") -> np.ndarray:
        """Conditional mean with a per-axis median fallback when the mean
        is not finite (heavy tails on unbounded cells)."""
        if kind == "median":
            return self.median_point()
        point = self.mean_point()
        if np.all(np.isfinite(point)):
            return point
        return self.median_point()


class AtomicRestriction(Restriction):
    """Weighted atoms inside a rectangle; splits carry fractional weights."""

    def __init__(self, points: np.ndarray, weights: np.ndarray,
                 rect: np.ndarray, mass: float):
        self.points = points
        self.weights = weights
        self.rect = rect
        self.mass = float(mass)

    def axis_threshold(self, axis: int, fraction: float) -> float:
        order = np.argsort(self.points[:, axis], kind="stable")
        cum = np.cumsum(self.weights[order])
        target = fraction * self.mass
        eps = 1e-12 * max(self.mass, 1.0)
        pos = int(np.searchsorted(cum, target - eps, side="left"))
        pos = min(pos, len(order) - 1)
        return float(self.points[order[pos], axis])

    def split_fraction(self, axis: int, fraction: float):
        t = self.axis_threshold(axis, fraction)
        left_mass = fraction * self.mass
        vals = self.points[:, axis]
        below = vals < t
        at = vals == t
        below_mass = float(self.weights[below].sum())
        at_mass = float(self.weights[at].sum())
        need = min(max(left_mass - below_mass, 0.0), at_mass)
        left_w = np.where(below, self.weights, 0.0)
        right_w = np.where(below, 0.0, self.weights)
        if at_mass > 0.0:
            frac = need / at_mass
            left_w = np.where(at, self.weights * frac, left_w)
            right_w = np.where(at, self.weights * (1.0 - frac), right_w)
        rect_l = self.rect.copy()
        rect_l[axis, 1] = min(rect_l[axis, 1], t)
        rect_r = self.rect.copy()
        rect_r[axis, 0] = max(rect_r[axis, 0], t)
        keep_l = left_w > 0.0
        keep_r = right_w > 0.0
        left = AtomicRestriction(self.points[keep_l], left_w[keep_l], rect_l, left_mass)
        right = AtomicRestriction(self.points[keep_r], right_w[keep_r], rect_r,
                                  self.mass - left_mass)
        if left.points.shape[0] == 0 or right.points.shape[0] == 0:
            raise NumericalError(
                f"degenerate split along axis {axis} at t={t}: a side came out empty"
            )
        return left, right, t

    def clip(self, rect: np.ndarray) -> "AtomicRestriction":
        """Restriction to a closed rectangle with full boundary weights."""
        inside = np.all((self.points >= rect[:, 0]) & (self.points <= rect[:, 1]), axis=1)
        pts, wts = self.points[inside], self.weights[inside]
        if pts.shape[0] == 0:
            raise ValidationError("the rectangle carries no mass")
        return AtomicRestriction(pts, wts, rect.copy(), float(wts.sum()))

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        p = self.weights / self.weights.sum()
        idx = rng.choice(len(p), size=count, p=p)
        return self.points[idx]

    def mean_point(self) -> np.ndarray:
        return (self.weights @ self.points) / self.weights.sum()

    def median_point(self) -> np.ndarray:
        return np.array([self.axis_threshold(axis, 0.5) for axis in range(self.dim)])


class ProductRestriction(Restriction):
    """Restriction of a product-of-quantile-functions measure, tracked as a
    per-axis interval in CDF space; all quantiles are direct evaluations."""

    def __init__(self, quantiles: Sequence[Callable], u_rect: np.ndarray,
                 rect: np.ndarray, mass: float):
        self.quantiles = quantiles
        self.u_rect = u_rect
        self.rect = rect
        self.mass = float(mass)

    def _q(self, axis: int, u):
        return np.asarray(self.quantiles[axis](np.asarray(u)), dtype=float)

    def axis_threshold(self, axis: int, fraction: float) -> float:
        lo, hi = self.u_rect[axis]
        return float(self._q(axis, lo + fraction * (hi - lo)))

    def split_fraction(self, axis: int, fraction: float):
        lo, hi = self.u_rect[axis]
        u_mid = lo + fraction * (hi - lo)
        t = float(self._q(axis, u_mid))
        u_l = self.u_rect.copy()
        u_l[axis, 1] = u_mid
        u_r = self.u_rect.copy()
        u_r[axis, 0] = u_mid
        rect_l = self.rect.copy()
        rect_l[axis, 1] = min(rect_l[axis, 1], t)
        rect_r = self.rect.copy()
        rect_r[axis, 0] = max(rect_r[axis, 0], t)
        left = ProductRestriction(self.quantiles, u_l, rect_l, fraction * self.mass)
        right = ProductRestriction(self.quantiles, u_r, rect_r, (1.0 - fraction) * self.mass)
        return left, right, t

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        cols = []
        for axis in range(self.dim):
            lo, hi = self.u_rect[axis]
            cols.append(self._q(axis, rng.uniform(lo, hi, size=count)))
        return np.column_stack(cols)

    def mean_point(self) -> np.ndarray:
        nodes, weights = _gauss(32)
        out = np.empty(self.dim)
        for axis in range(self.dim):
            lo, hi = self.u_rect[axis]
            u = 0.5 * (lo + hi) + 0.5 * (hi - lo) * nodes
            out[axis] = 0.5 * float(weights @ self._q(axis, u))
        return out

    def median_point(self) -> np.ndarray:
        return np.array([
            float(self._q(axis, 0.5 * (self.u_rect[axis, 0] + self.u_rect[axis, 1])))
            for axis in range(self.dim)
        ])

    def clip(self, rect: np.ndarray) -> "ProductRestriction":
        u_rect = self.u_rect.copy()
        new_rect = self.rect.copy()
        mass = 1.0
        for axis in range(self.dim):
            u_lo = self._u_of(axis, rect[axis, 0], side="lo")
            u_hi = self._u_of(axis, rect[axis, 1], side="hi")
            u_lo = max(u_lo, self.u_rect[axis, 0])
            u_hi = min(u_hi, self.u_rect[axis, 1])
            if u_hi <= u_lo:
                raise ValidationError("the rectangle carries no mass")
            u_rect[axis] = (u_lo, u_hi)
            new_rect[axis, 0] = max(new_rect[axis, 0], rect[axis, 0])
            new_rect[axis, 1] = min(new_rect[axis, 1], rect[axis, 1])
            mass *= (u_hi - u_lo) / (self.u_rect[axis, 1] - self.u_rect[axis, 0])
        return ProductRestriction(self.quantiles, u_rect, new_rect, mass * self.mass)

    def _u_of(self, axis: int, t: float, side: str) -> float:
        """CDF value of a position via bisection on the quantile function."""
        if t == math.inf:
            return 1.0
        if t == -math.inf:
            return 0.0
        lo, hi = 0.0, 1.0
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if float(self._q(axis, mid)) <= t:
                lo = mid
            else:
                hi = mid
        return lo if side == "lo" else hi


# ---------------------------------------------------------------------------
# target measures
# ---------------------------------------------------------------------------


class TargetMeasure(abc.ABC):
    """A probability measure accessible by sampling and by conditional
    quantiles along coordinate axes."""

    dim: int
    kind: str = "measure"

    @abc.abstractmethod
    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        ...

    @abc.abstractmethod
    def root_restriction(self) -> Restriction:
        ...

    @abc.abstractmethod
    def discretize(self, target_count: int):
        """Deterministic weighted-atom stand-in for distance estimation:
        (points, weights)."""

    def describe(self) -> dict:
        return {"type": self.kind, "dim": self.dim}


class AtomicMeasure(TargetMeasure):
    """A finite weighted atom cloud (empirical sample clouds, atom mixes)."""

    kind = "cloud"

    def __init__(self, points, weights=None):
        pts = np.array(points, dtype=float, copy=True)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise ValidationError("atom cloud must be a nonempty (m, dim) array")
        if not np.all(np.isfinite(pts)):
            raise ValidationError("atom positions must be finite")
        if weights is None:
            wts = np.full(pts.shape[0], 1.0 / pts.shape[0])
        else:
            wts = np.array(weights, dtype=float, copy=True)
            if wts.shape != (pts.shape[0],):
                raise ValidationError("weights must match the number of atoms")
            if np.any(wts < 0) or not np.all(np.isfinite(wts)):
                raise ValidationError("weights must be finite and nonnegative")
            total = float(wts.sum())
            if abs(total - 1.0) > 1e-6:
                raise ValidationError(f"weights must sum to 1, got {total}")
            wts = wts / total
        pts.setflags(write=False)
        self.points = pts
        self.weights = wts
        self.dim = pts.shape[1]

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        idx = rng.choice(len(self.weights), size=count, p=self.weights)
        return self.points[idx]

    def root_restriction(self) -> AtomicRestriction:
        return AtomicRestriction(self.points, self.weights.copy(),
                                 _full_rect(self.dim), 1.0)

    def discretize(self, target_count: int):
        return self.points, self.weights

    def describe(self) -> dict:
        return {"type": self.kind, "dim": self.dim, "atoms": len(self.weights)}


class ProductQuantileMeasure(TargetMeasure):
    """Independent product measure given by one quantile function per axis.

    Each quantile function maps u in [0, 1] (vectorized) to a position; it
    is the generalized inverse CDF of that axis marginal.
    """

    kind = "quantile_product"

    def __init__(self, quantile_fns: Sequence[Callable]):
        if not quantile_fns:
            raise ValidationError("need at least one quantile function")
        self.quantiles = tuple(quantile_fns)
        self.dim = len(self.quantiles)

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        u = rng.uniform(0.0, 1.0, size=(count, self.dim))
        cols = [np.asarray(self.quantiles[k](u[:, k]), dtype=float) for k in range(self.dim)]
        return np.column_stack(cols)

    def root_restriction(self) -> ProductRestriction:
        u_rect = np.array([(0.0, 1.0)] * self.dim)
        return ProductRestriction(self.quantiles, u_rect, _full_rect(self.dim), 1.0)

    def discretize(self, target_count: int):
        per_axis = max(1, round(target_count ** (1.0 / self.dim)))
        u = (np.arange(per_axis) + 0.5) / per_axis
        axes = [np.asarray(self.quantiles[k](u), dtype=float) for k in range(self.dim)]
        grids = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([g.reshape(-1) for g in grids], axis=1)
        return pts, np.full(pts.shape[0], 1.0 / pts.shape[0])


class UniformBoxMeasure(ProductQuantileMeasure):
    """Uniform probability on an axis-aligned box."""

    kind = "uniform_box"

    def __init__(self, lo, hi):
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValidationError("box corners must be matching 1-d arrays")
        if np.any(hi <= lo) or not np.all(np.isfinite(lo) & np.isfinite(hi)):
            raise ValidationError("box must have finite positive extent on every axis")
        self.lo, self.hi = lo, hi

        def make_q(a: float, b: float):
            return lambda u: a + np.asarray(u, dtype=float) * (b - a)

        super().__init__([make_q(float(a), float(b)) for a, b in zip(lo, hi)])

    def describe(self) -> dict:
        return {"type": self.kind, "dim": self.dim,
                "lo": self.lo.tolist(), "hi": self.hi.tolist()}


class DensityBoxMeasure(AtomicMeasure):
    """A density on a box, held as a fine-grid atom surrogate.

    Cell masses come from a per-cell Gauss rule at construction; quantile
    and mass queries are then exact for the surrogate, whose resolution is
    the declared accuracy.  Sampling smooths atoms back out by uniform
    jitter inside their grid cells.
    """

    kind = "density"

    def __init__(self, density: Callable, lo, hi, cells_per_axis: Optional[int] = None,
                 normalize: bool = False):
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        if lo.shape != hi.shape or np.any(hi <= lo):
            raise ValidationError("box corners must match and have positive extent")
        dim = lo.size
        if cells_per_axis is None:
            cells_per_axis = {1: 4096, 2: 256, 3: 40}.get(dim, 16)
        edges = [np.linspace(lo[k], hi[k], cells_per_axis + 1) for k in range(dim)]
        centers = [0.5 * (e[1:] + e[:-1]) for e in edges]
        steps = np.array([e[1] - e[0] for e in edges])

        nodes, gw = _gauss(4)
        offsets = np.meshgrid(*[nodes] * dim, indexing="ij")
        offs = np.stack([o.reshape(-1) for o in offsets], axis=1)  # (4^dim, dim)
        wts = np.ones(offs.shape[0])
        for g in np.meshgrid(*[gw] * dim, indexing="ij"):
            wts = wts * g.reshape(-1)

        grids = np.meshgrid(*centers, indexing="ij")
        cell_centers = np.stack([g.reshape(-1) for g in grids], axis=1)
        masses = np.zeros(cell_centers.shape[0])
        cell_vol = float(np.prod(steps / 2.0))
        for j in range(offs.shape[0]):
            pts = cell_centers + offs[j] * (steps / 2.0)
            masses += wts[j] * np.asarray(density(pts), dtype=float)
        masses *= cell_vol
        if np.any(masses < -1e-12) or not np.all(np.isfinite(masses)):
            raise ValidationError("density must be finite and nonnegative on the box")
        masses = np.maximum(masses, 0.0)
        total = float(masses.sum())
        if not normalize and abs(total - 1.0) > 1e-9:
            raise ValidationError(
                f"density mass on the box is {total:.12g}, not 1; pass normalize=True to rescale"
            )
        if total <= 0:
            raise ValidationError("density carries no mass on the box")
        keep = masses > 0
        super().__init__(cell_centers[keep], masses[keep] / total)
        self._steps = steps
        self._resolution = cells_per_axis

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        idx = rng.choice(len(self.weights), size=count, p=self.weights)
        jitter = rng.uniform(-0.5, 0.5, size=(count, self.dim)) * self._steps
        return self.points[idx] + jitter

    def describe(self) -> dict:
        return {"type": self.kind, "dim": self.dim, "cells_per_axis": self._resolution}


class UniformBallMeasure(AtomicMeasure):
    """Uniform probability on a Euclidean ball.

    Global sampling is exact (polar); partition queries run against a
    normalized indicator-grid surrogate over the bounding box.
    """

    kind = "uniform_ball"

    def __init__(self, center, radius: float, cells_per_axis: Optional[int] = None):
        center = np.atleast_1d(np.asarray(center, dtype=float))
        if not (radius > 0 and math.isfinite(radius)):
            raise ValidationError("ball radius must be positive and finite")
        dim = center.size
        if cells_per_axis is None:
            cells_per_axis = {1: 2048, 2: 128, 3: 32}.get(dim, 12)
        edges = [np.linspace(c - radius, c + radius, cells_per_axis + 1) for c in center]
        centers_1d = [0.5 * (e[1:] + e[:-1]) for e in edges]
        step = 2.0 * radius / cells_per_axis

        nodes, gw = _gauss(4)
        offsets = np.meshgrid(*[nodes] * dim, indexing="ij")
        offs = np.stack([o.reshape(-1) for o in offsets], axis=1)
        wts = np.ones(offs.shape[0])
        for g in np.meshgrid(*[gw] * dim, indexing="ij"):
            wts = wts * g.reshape(-1)
        wts = wts / wts.sum()

        grids = np.meshgrid(*centers_1d, indexing="ij")
        cell_centers = np.stack([g.reshape(-1) for g in grids], axis=1)
        masses = np.zeros(cell_centers.shape[0])
        for j in range(offs.shape[0]):
            pts = cell_centers + offs[j] * (step / 2.0)
            inside = np.linalg.norm(pts - center[None, :], axis=1) <= radius
            masses += wts[j] * inside
        keep = masses > 0
        super().__init__(cell_centers[keep], masses[keep] / masses.sum())
        self.center = center
        self.radius = float(radius)
        self._resolution = cells_per_axis

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        direction = rng.normal(size=(count, self.dim))
        direction /= np.linalg.norm(direction, axis=1, keepdims=True)
        r = self.radius * rng.uniform(0.0, 1.0, size=(count, 1)) ** (1.0 / self.dim)
        return self.center[None, :] + direction * r

    def describe(self) -> dict:
        return {"type": self.kind, "dim": self.dim,
                "center": self.center.tolist(), "radius": self.radius}


def atoms_measure(positions, weights) -> AtomicMeasure:
    """A finite mix of point masses (weights must sum to 1)."""
    m = AtomicMeasure(positions, weights)
    m.kind = "atoms"
    return m


def single_atom(position) -> AtomicMeasure:
    pos = np.atleast_1d(np.asarray(position, dtype=float))
    return atoms_measure(pos.reshape(1, -1), [1.0])
