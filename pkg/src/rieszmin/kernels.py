"""Radial interaction kernels and numeric checks of the standing assumptions.

Every built-in kernel is a function of the separation vector through its
Euclidean norm, so central symmetry holds by construction.  Kernels are
immutable after construction and evaluation is pure, which makes them safe
to share across any number of workers.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import GradientUndefinedError, IntegrabilityError, ValidationError
from .quadrature import (
    refining_cube_integral,
    refining_radial_integral,
    unit_sphere_area,
)


class Kernel:
    """Base class for radial pairwise interaction kernels on R^dim.

    Subclasses provide the radial profile ``radial(r)`` and its derivative
    ``radial_prime(r)``, both vectorized over numpy arrays of radii.
    """

    dim: int
    near_origin_radius: Optional[float]

    # -- radial profile -------------------------------------------------

    def radial(self, r):
        raise NotImplementedError

    def radial_prime(self, r):
        raise NotImplementedError

    @property
    def singular_at_zero(self) -> bool:
        """True when the kernel value at zero separation is +inf."""
        return not math.isfinite(self.value_at_zero)

    @property
    def value_at_zero(self) -> float:
        return float(self.radial(np.asarray(0.0)))

    # -- vector interface ------------------------------------------------

    def _check_vector(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape != (self.dim,):
            raise ValidationError(
                f"expected a vector of dimension {self.dim}, got shape {v.shape}"
            )
        return v

    def evaluate(self, v) -> float:
        """Kernel value at separation vector v; +inf only allowed at v = 0."""
        v = self._check_vector(v)
        return float(self.radial(np.linalg.norm(v)))

    def gradient(self, v) -> np.ndarray:
        """Gradient at v != 0: radial_prime(|v|) * v/|v|."""
        v = self._check_vector(v)
        r = float(np.linalg.norm(v))
        if r == 0.0:
            raise GradientUndefinedError(
                "kernel gradient is undefined at zero separation"
            )
        return float(self.radial_prime(r)) * v / r

    def symmetrized(self) -> "Kernel":
        """Central symmetrization (g(v) + g(-v))/2.

        All built-in kernels are radial, hence already symmetric, and the
        construction is the identity transformation.
        """
        return self

    def describe(self) -> dict:
        raise NotImplementedError


def _positive(name: str, value: float) -> float:
    value = float(value)
    if not (math.isfinite(value) and value > 0.0):
        raise ValidationError(f"{name} must be a positive finite number, got {value}")
    return value


def _check_dim(dim: int) -> int:
    if int(dim) != dim or dim < 1:
        raise ValidationError(f"dim must be an integer >= 1, got {dim}")
    return int(dim)


@dataclass(frozen=True)
class PowerLawKernel(Kernel):
    """g(v) = |v|^beta / beta - |v|^alpha / alpha with -dim < alpha < beta.

    Repulsive near the origin for alpha < beta, attractive at long range
    when beta > 0.  Singular at zero separation iff alpha < 0; the local
    integrability bound alpha > -dim is enforced at construction.
    """

    alpha: float
    beta: float
    dim: int = 2
    near_origin_radius: Optional[float] = None

    def __post_init__(self):
        _check_dim(self.dim)
        a, b = float(self.alpha), float(self.beta)
        if not (math.isfinite(a) and math.isfinite(b)):
            raise ValidationError("alpha and beta must be finite")
        if a == 0.0 or b == 0.0:
            raise ValidationError("alpha and beta must be nonzero (the profile divides by them)")
        if not (-self.dim < a < b):
            raise ValidationError(
                f"power-law exponents need -dim < alpha < beta, got alpha={a}, beta={b}, dim={self.dim}"
            )
        if self.near_origin_radius is None:
            # the radial derivative r^(beta-1) - r^(alpha-1) is negative on (0, 1)
            object.__setattr__(self, "near_origin_radius", 1.0)

    def radial(self, r):
        r = np.asarray(r, dtype=float)
        zero_value = math.inf if self.alpha < 0 else 0.0
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            body = np.where(r > 0, r, 1.0)
            vals = body ** self.beta / self.beta - body ** self.alpha / self.alpha
            return np.where(r > 0, vals, zero_value)

    def radial_prime(self, r):
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            return r ** (self.beta - 1.0) - r ** (self.alpha - 1.0)

    def describe(self) -> dict:
        return {
            "variant": "power_law",
            "alpha": self.alpha,
            "beta": self.beta,
            "dim": self.dim,
            "near_origin_radius": self.near_origin_radius,
        }


@dataclass(frozen=True)
class MorseKernel(Kernel):
    """g(v) = c1 exp(-|v|/l1) - c2 exp(-|v|/l2), all constants positive.

    Bounded, with exponentially small tails; the classical hard case for
    existence of discrete minimizers.
    """

    c1: float
    c2: float
    l1: float
    l2: float
    dim: int = 2
    near_origin_radius: Optional[float] = None

    def __post_init__(self):
        _check_dim(self.dim)
        for name in ("c1", "c2", "l1", "l2"):
            _positive(name, getattr(self, name))
        if self.near_origin_radius is None:
            object.__setattr__(self, "near_origin_radius", self._derived_monotone_radius())

    def _derived_monotone_radius(self) -> Optional[float]:
        # decreasing at 0 requires c1/l1 > c2/l2; the derivative changes sign
        # where c1/l1 exp(-r/l1) = c2/l2 exp(-r/l2)
        d0 = self.c1 / self.l1 - self.c2 / self.l2
        if d0 <= 0.0:
            return None
        if self.l1 == self.l2:
            return self.l1  # derivative keeps one sign; any finite scale works
        r_star = math.log((self.c1 * self.l2) / (self.c2 * self.l1)) / (1.0 / self.l1 - 1.0 / self.l2)
        if r_star > 0.0 and math.isfinite(r_star):
            return r_star
        return max(self.l1, self.l2)

    def radial(self, r):
        r = np.asarray(r, dtype=float)
        return self.c1 * np.exp(-r / self.l1) - self.c2 * np.exp(-r / self.l2)

    def radial_prime(self, r):
        r = np.asarray(r, dtype=float)
        return (-self.c1 / self.l1) * np.exp(-r / self.l1) + (self.c2 / self.l2) * np.exp(-r / self.l2)

    def describe(self) -> dict:
        return {
            "variant": "morse",
            "c1": self.c1,
            "c2": self.c2,
            "l1": self.l1,
            "l2": self.l2,
            "dim": self.dim,
            "near_origin_radius": self.near_origin_radius,
        }


@dataclass(frozen=True)
class TruncatedKernel(Kernel):
    """min(inner(v), level): the inner kernel capped at a finite level.

    The gradient is the inner gradient strictly below the cap, zero above
    it, and zero on the boundary set {inner = level} (any selection works
    for descent; the set has measure zero).
    """

    inner: Kernel
    level: float

    def __post_init__(self):
        if not isinstance(self.inner, Kernel):
            raise ValidationError("inner must be a kernel")
        if not math.isfinite(float(self.level)):
            raise ValidationError("truncation level must be finite")

    @property
    def dim(self) -> int:  # type: ignore[override]
        return self.inner.dim

    @property
    def near_origin_radius(self) -> Optional[float]:  # type: ignore[override]
        # min with a constant preserves monotone decrease near the origin
        return self.inner.near_origin_radius

    def radial(self, r):
        return np.minimum(self.inner.radial(r), self.level)

    def radial_prime(self, r):
        r = np.asarray(r, dtype=float)
        return np.where(self.inner.radial(r) < self.level, self.inner.radial_prime(r), 0.0)

    def describe(self) -> dict:
        return {"variant": "truncated", "level": self.level, "inner": self.inner.describe()}


@dataclass(frozen=True)
class TabulatedKernel(Kernel):
    """Radial kernel interpolated from (radius, value) samples.

    Interpolation is monotone piecewise-cubic (PCHIP), so stretches of
    monotone data stay monotone.  Outside the sampled range the profile is
    clamped to the boundary values.  A +inf value is allowed only at
    radius 0 and marks the kernel as singular there.
    """

    radii: tuple
    values: tuple
    dim: int = 2
    near_origin_radius: Optional[float] = None

    def __post_init__(self):
        radii = np.asarray(self.radii, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if radii.ndim != 1 or radii.size < 2 or radii.shape != values.shape:
            raise ValidationError("need matching 1-d radius and value arrays with >= 2 samples")
        if radii[0] < 0 or np.any(np.diff(radii) <= 0):
            raise ValidationError("radius grid must be nonnegative and strictly increasing")
        inf_mask = ~np.isfinite(values)
        if np.any(inf_mask & ((radii != 0.0) | (values != math.inf))):
            raise ValidationError("non-finite values are only allowed as +inf at radius 0")
        _check_dim(self.dim)
        object.__setattr__(self, "radii", tuple(radii.tolist()))
        object.__setattr__(self, "values", tuple(values.tolist()))
        finite = np.isfinite(values)
        if finite.sum() < 2:
            raise ValidationError("need at least 2 finite samples to interpolate")
        if self.near_origin_radius is None:
            object.__setattr__(self, "near_origin_radius", self._monotone_prefix_radius())

    def _monotone_prefix_radius(self) -> Optional[float]:
        vals = np.asarray(self.values)
        radii = np.asarray(self.radii)
        j = 0
        while j + 1 < len(vals) and vals[j + 1] <= vals[j]:
            j += 1
        return float(radii[j]) if j >= 1 else None

    @property
    def _interp(self):
        cached = self.__dict__.get("_interp_cache")
        if cached is None:
            from scipy.interpolate import PchipInterpolator

            radii = np.asarray(self.radii)
            values = np.asarray(self.values)
            finite = np.isfinite(values)
            spline = PchipInterpolator(radii[finite], values[finite], extrapolate=False)
            cached = (spline, spline.derivative(), float(radii[finite][0]),
                      float(radii[finite][-1]), float(values[finite][0]),
                      float(values[finite][-1]))
            self.__dict__["_interp_cache"] = cached
        return cached

    def radial(self, r):
        spline, _, lo, hi, v_lo, v_hi = self._interp
        r = np.asarray(r, dtype=float)
        out = spline(np.clip(r, lo, hi))
        out = np.where(r < lo, v_lo, out)
        out = np.where(r > hi, v_hi, out)
        if self.singular_at_zero:
            out = np.where(r == 0.0, math.inf, out)
        return out

    def radial_prime(self, r):
        _, deriv, lo, hi, _, _ = self._interp
        r = np.asarray(r, dtype=float)
        inside = (r >= lo) & (r <= hi)
        out = np.where(inside, deriv(np.clip(r, lo, hi)), 0.0)
        return out

    @property
    def singular_at_zero(self) -> bool:  # type: ignore[override]
        return self.radii[0] == 0.0 and not math.isfinite(self.values[0])

    @property
    def value_at_zero(self) -> float:  # type: ignore[override]
        if self.radii[0] == 0.0:
            return float(self.values[0])
        return float(self.radial(np.asarray(0.0)))

    def describe(self) -> dict:
        return {
            "variant": "tabulated",
            "radii": list(self.radii),
            "values": ["inf" if not math.isfinite(v) else v for v in self.values],
            "dim": self.dim,
            "near_origin_radius": self.near_origin_radius,
        }


# ---------------------------------------------------------------------------
# numeric verification of the standing assumptions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CheckScheme:
    """Sampling plan for the assumption checks, recorded in the report so a
    failure can be reproduced exactly."""

    radial_samples: int = 512
    r_min: float = 1e-6
    r_max: float = 1e3
    far_radii: tuple = tuple(2.0 ** k for k in range(0, 13))
    h2_tolerance: float = 1e-6
    h3_pairs: int = 256
    h4_samples: int = 200_000
    seed: int = 0


@dataclass
class AssumptionReport:
    """Outcome of the sampled checks of the four standing assumptions.

    Sampling can refute an assumption but never prove it; the checker is a
    guard against misconfiguration, not a proof.
    """

    h1_lower_bound: float
    h1_lower_bound_finite: bool
    h1_local_integrability: bool
    h1_integral_abs: Optional[float]
    h2_liminf_at_infinity: float
    h2_pass: bool
    h3_monotone_near_origin: Optional[bool]
    h4_witness_energy: Optional[float] = None
    h4_std_error: Optional[float] = None
    h4_pass: Optional[bool] = None
    scheme: CheckScheme = field(default_factory=CheckScheme)

    @property
    def passed(self) -> bool:
        ok = self.h1_lower_bound_finite and self.h1_local_integrability and self.h2_pass
        if self.h3_monotone_near_origin is False:
            ok = False
        if self.h4_pass is False:
            ok = False
        return ok

    def as_dict(self) -> dict:
        return {
            "h1_lower_bound": self.h1_lower_bound,
            "h1_lower_bound_finite": self.h1_lower_bound_finite,
            "h1_local_integrability": self.h1_local_integrability,
            "h1_integral_abs": self.h1_integral_abs,
            "h2_liminf_at_infinity": self.h2_liminf_at_infinity,
            "h2_pass": self.h2_pass,
            "h3_monotone_near_origin": self.h3_monotone_near_origin,
            "h4_witness_energy": self.h4_witness_energy,
            "h4_std_error": self.h4_std_error,
            "h4_pass": self.h4_pass,
            "passed": self.passed,
            "scheme": {
                "radial_samples": self.scheme.radial_samples,
                "r_min": self.scheme.r_min,
                "r_max": self.scheme.r_max,
                "far_radii": list(self.scheme.far_radii),
                "h2_tolerance": self.scheme.h2_tolerance,
                "h3_pairs": self.scheme.h3_pairs,
                "h4_samples": self.scheme.h4_samples,
                "seed": self.scheme.seed,
            },
        }


def check_assumptions(kernel: Kernel, witness=None,
                      scheme: Optional[CheckScheme] = None) -> AssumptionReport:
    """Sample-based verification of the four standing assumptions.

    * lower bound and local integrability of the kernel,
    * nonnegative liminf at infinity,
    * monotone decrease on the declared near-origin radius,
    * a negative-energy witness measure, when one is supplied.

    The witness check estimates the double integral of the kernel against
    the witness by Monte Carlo and reports the standard error.
    """
    scheme = scheme or CheckScheme()

    grid = np.geomspace(scheme.r_min, scheme.r_max, scheme.radial_samples)
    sampled = np.asarray(kernel.radial(grid), dtype=float)
    far = np.asarray(kernel.radial(np.asarray(scheme.far_radii)), dtype=float)
    lower = float(min(np.min(sampled), np.min(far)))
    lower_finite = math.isfinite(lower)

    integral_abs: Optional[float] = None
    integrable = False
    try:
        area = unit_sphere_area(kernel.dim)

        def abs_shell(r):
            return np.abs(np.asarray(kernel.radial(r), dtype=float)) * r ** (kernel.dim - 1)

        integral_abs = area * refining_radial_integral(abs_shell, 1.0)
        integrable = math.isfinite(integral_abs)
    except IntegrabilityError:
        integrable = False

    half = len(far) // 2
    tail_min = float(np.min(far[half:]))
    h2_value = float(np.min(far))
    h2_pass = tail_min >= -scheme.h2_tolerance

    h3: Optional[bool] = None
    r_bar = kernel.near_origin_radius
    if r_bar is not None and r_bar > 0:
        radii = np.linspace(r_bar / scheme.h3_pairs, r_bar, scheme.h3_pairs)
        vals = np.asarray(kernel.radial(radii), dtype=float)
        finite_vals = vals[np.isfinite(vals)]
        scale = float(np.max(np.abs(finite_vals))) if finite_vals.size else 1.0
        slack = 1e-12 * (1.0 + scale)
        h3 = bool(np.all(np.diff(vals) <= slack))

    h4_energy = h4_err = None
    h4_pass = None
    if witness is not None:
        from .energy import continuum_energy_mc

        mc = continuum_energy_mc(witness, kernel, scheme.h4_samples, scheme.seed)
        h4_energy, h4_err = mc.estimate, mc.std_error
        h4_pass = bool(mc.reliable and h4_energy + 3.0 * h4_err < 0.0)

    return AssumptionReport(
        h1_lower_bound=lower,
        h1_lower_bound_finite=lower_finite,
        h1_local_integrability=integrable,
        h1_integral_abs=integral_abs,
        h2_liminf_at_infinity=h2_value,
        h2_pass=h2_pass,
        h3_monotone_near_origin=h3,
        h4_witness_energy=h4_energy,
        h4_std_error=h4_err,
        h4_pass=h4_pass,
        scheme=scheme,
    )


def local_avg_integral(kernel: Kernel, eta: float, rel_tol: float = 1e-8) -> float:
    """Average of the kernel over the cube [-eta/2, eta/2]^dim.

    The cube is integrated by geometric shells toward the origin so an
    integrable singularity at zero is handled; a non-integrable one raises
    :class:`IntegrabilityError`.
    """
    if not (eta > 0 and math.isfinite(eta)):
        raise ValidationError(f"cube side must be positive and finite, got {eta}")

    def fn(points: np.ndarray) -> np.ndarray:
        return np.asarray(kernel.radial(np.linalg.norm(points, axis=1)), dtype=float)

    total = refining_cube_integral(fn, eta, kernel.dim, rel_tol=rel_tol)
    return total / eta ** kernel.dim


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def load_radial_csv(path) -> tuple:
    """Read a two-column (radius, value) CSV; 'inf' is accepted as a value."""
    radii, values = [], []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or row[0].strip().startswith("#"):
                continue
            if len(row) < 2:
                raise ValidationError(f"{path}:{lineno}: expected two columns")
            try:
                radii.append(float(row[0]))
                values.append(float(row[1]))
            except ValueError as exc:
                raise ValidationError(f"{path}:{lineno}: {exc}") from exc
    return tuple(radii), tuple(values)


def kernel_from_config(block: dict, base_dir: str = ".") -> Kernel:
    """Build a kernel from a structured config block."""
    if not isinstance(block, dict) or "variant" not in block:
        raise ValidationError("kernel block must be a mapping with a 'variant' key")
    variant = str(block["variant"]).lower()
    dim = int(block.get("dim", 2))
    r_bar = block.get("near_origin_radius")
    if variant in ("power_law", "powerlaw", "power-law"):
        return PowerLawKernel(alpha=float(block["alpha"]), beta=float(block["beta"]),
                              dim=dim, near_origin_radius=r_bar)
    if variant == "morse":
        return MorseKernel(c1=float(block["c1"]), c2=float(block["c2"]),
                           l1=float(block["l1"]), l2=float(block["l2"]),
                           dim=dim, near_origin_radius=r_bar)
    if variant == "truncated":
        inner = kernel_from_config(block["inner"], base_dir)
        return TruncatedKernel(inner=inner, level=float(block["level"]))
    if variant in ("tabulated", "tabulated_radial"):
        if "path" in block:
            import os

            radii, values = load_radial_csv(os.path.join(base_dir, block["path"]))
        else:
            radii = tuple(float(r) for r in block["radii"])
            values = tuple(float(v) for v in block["values"])
        return TabulatedKernel(radii=radii, values=values, dim=dim, near_origin_radius=r_bar)
    raise ValidationError(f"unknown kernel variant {variant!r}")


def kernel_to_config(kernel: Kernel) -> dict:
    return kernel.describe()
