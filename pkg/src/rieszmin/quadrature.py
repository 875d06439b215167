"""Deterministic quadrature with geometric refinement toward the origin.

Radial interaction kernels are allowed an integrable singularity at zero
separation, so plain tensor quadrature over a region containing the origin
is useless.  Both integrators below peel geometrically shrinking shells off
the origin, sum a fixed-order Gauss-Legendre rule per shell, and stop once
two successive refinements move the total by less than ``rel_tol``.  Shell
contributions that stop decaying are the signature of a non-integrable
singularity and raise :class:`IntegrabilityError`.
"""

from __future__ import annotations

import functools
import itertools
import math

import numpy as np

from .errors import IntegrabilityError

# levels with |c_k| >= NO_DECAY_RATIO * |c_{k-1}| count as "not decaying"
_NO_DECAY_RATIO = 0.999
_NO_DECAY_STREAK = 6


@functools.lru_cache(maxsize=None)
def _gauss(order: int):
    nodes, weights = np.polynomial.legendre.leggauss(order)
    return nodes, weights


def gauss_panel(fn, a: float, b: float, order: int = 32) -> float:
    """Gauss-Legendre integral of a vectorized scalar function over [a, b]."""
    nodes, weights = _gauss(order)
    half = 0.5 * (b - a)
    pts = 0.5 * (a + b) + half * nodes
    return float(half * np.dot(weights, fn(pts)))


def box_quadrature(fn, lo, hi, order: int = 8) -> float:
    """Tensor-product Gauss-Legendre integral over a box.

    ``fn`` maps an (m, dim) array of points to an (m,) array of values.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    nodes, weights = _gauss(order)
    axis_nodes = []
    axis_weights = []
    for k in range(lo.size):
        half = 0.5 * (hi[k] - lo[k])
        axis_nodes.append(0.5 * (hi[k] + lo[k]) + half * nodes)
        axis_weights.append(half * weights)
    grids = np.meshgrid(*axis_nodes, indexing="ij")
    pts = np.stack([g.reshape(-1) for g in grids], axis=1)
    wts = np.ones(pts.shape[0])
    for g in np.meshgrid(*axis_weights, indexing="ij"):
        wts = wts * g.reshape(-1)
    return float(np.dot(wts, fn(pts)))


def _shell_boxes(side: float, dim: int):
    """The 3^dim - 1 boxes of [-side/2, side/2]^dim minus its central
    half-side subcube.  None of them touches the origin."""
    s = side / 2.0
    cuts = ((-s, -s / 2.0), (-s / 2.0, s / 2.0), (s / 2.0, s))
    boxes = []
    for combo in itertools.product(range(3), repeat=dim):
        if all(c == 1 for c in combo):
            continue
        lo = [cuts[c][0] for c in combo]
        hi = [cuts[c][1] for c in combo]
        boxes.append((lo, hi))
    return boxes


def _run_refinement(contribution, rel_tol: float, max_levels: int) -> float:
    """Shared accumulation loop: sum per-level contributions, stop on two
    successive negligible levels, raise when levels stop decaying."""
    total = 0.0
    history = []
    quiet = 0
    for level in range(max_levels):
        c = contribution(level)
        history.append(c)
        total += c
        scale = max(abs(total), 1e-300)
        if abs(c) <= rel_tol * scale:
            quiet += 1
            if quiet >= 2:
                # geometric extrapolation of the untouched tail
                if len(history) >= 3 and history[-3] != 0.0:
                    rho = history[-2] / history[-3]
                    if 0.0 < abs(rho) < 0.9:
                        total += history[-1] * rho / (1.0 - rho)
                return total
        else:
            quiet = 0
        if level >= _NO_DECAY_STREAK + 2:
            recent = history[-(_NO_DECAY_STREAK + 1):]
            decaying = any(
                abs(recent[i + 1]) < _NO_DECAY_RATIO * abs(recent[i])
                for i in range(len(recent) - 1)
            )
            if not decaying and abs(c) > rel_tol * scale:
                raise IntegrabilityError(
                    "refinement contributions near the origin are not "
                    f"decaying (last level {c:.6e}); the integrand looks "
                    "non-integrable"
                )
    raise IntegrabilityError(
        f"refinement did not converge within {max_levels} levels"
    )


def refining_cube_integral(fn, side: float, dim: int, rel_tol: float = 1e-8,
                           max_levels: int = 100, order: int = 8) -> float:
    """Integral of ``fn`` over the cube [-side/2, side/2]^dim.

    ``fn`` maps (m, dim) points to (m,) values and may blow up at the origin
    only.  The cube is decomposed into geometric shells of boxes that never
    touch the origin.
    """

    def level_contribution(level: int) -> float:
        level_side = side / (2.0 ** level)
        return sum(
            box_quadrature(fn, lo, hi, order)
            for lo, hi in _shell_boxes(level_side, dim)
        )

    return _run_refinement(level_contribution, rel_tol, max_levels)


def refining_radial_integral(fn, r_hi: float, rel_tol: float = 1e-8,
                             max_levels: int = 140, order: int = 32) -> float:
    """Integral of a vectorized scalar ``fn`` over (0, r_hi] via geometric
    panels [r_hi 2^-(k+1), r_hi 2^-k]."""

    def level_contribution(level: int) -> float:
        hi = r_hi / (2.0 ** level)
        return gauss_panel(fn, hi / 2.0, hi, order)

    return _run_refinement(level_contribution, rel_tol, max_levels)


def unit_sphere_area(dim: int) -> float:
    """Surface measure of the unit sphere in R^dim (2 for dim = 1)."""
    return 2.0 * math.pi ** (dim / 2.0) / math.gamma(dim / 2.0)
