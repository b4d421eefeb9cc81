"""Karhunen-Loeve measures, the CDF map, and isometric L^p embeddings.

A measure is the law of u = sum_j sqrt(lambda_j) Z_j e_j with independent
unit-variance coordinates Z_j, truncated at J terms.  Two coordinate laws
are supported: standard Gaussian and Uniform(-sqrt(3), sqrt(3)); both have
bounded densities, so the coordinate-wise CDF map

    h_d(u) = (F_1(u_1 / sqrt(lambda_1)), ..., F_d(u_d / sqrt(lambda_d)))

pushes the first d coordinates to Uniform(0,1)^d.  Composition f -> f o h_d
is an isometry from L^p([0,1]^d) into L^p(mu) and transports a unit
sup-norm-Lipschitz f (w.r.t. the max norm on the cube) to a functional
with Lipschitz constant at most L / sqrt(lambda_d) in the coordinate
l2 norm, where L bounds both the coordinate densities and sqrt(lambda_1).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.special import ndtr

from .errors import DimensionExceedsTruncation
from .rng import (STREAM_KL_SAMPLE, STREAM_MC_NORM, STREAM_TRANSPORT, stream)

_SQRT3 = math.sqrt(3.0)

_DENSITY_SUP = {
    "gaussian": 1.0 / math.sqrt(2 * math.pi),
    "uniform": 1.0 / (2 * _SQRT3),
}


class KLMeasure:
    """Truncated product measure with declared eigenvalues and coordinate law."""

    def __init__(self, eigenvalues, law: str = "gaussian"):
        ev = np.asarray(eigenvalues, dtype=float)
        if ev.ndim != 1 or ev.size < 1:
            raise ValueError("need at least one eigenvalue (J >= 1)")
        if np.any(ev <= 0):
            raise ValueError("eigenvalues must be positive")
        if np.any(np.diff(ev) > 1e-12):
            raise ValueError("eigenvalues must be nonincreasing")
        if law not in _DENSITY_SUP:
            raise ValueError(f"unknown law {law!r}; use 'gaussian' or 'uniform'")
        self.eigenvalues = ev
        self.law = law
        self.sqrt_ev = np.sqrt(ev)

    @property
    def truncation(self) -> int:
        return int(self.eigenvalues.size)

    @property
    def density_sup(self) -> float:
        return _DENSITY_SUP[self.law]

    @property
    def density_bound(self) -> float:
        """L = max(sup-norm of the coordinate density, sqrt(lambda_1))."""
        return max(self.density_sup, float(self.sqrt_ev[0]))

    def cdf(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if self.law == "gaussian":
            return ndtr(z)
        return np.clip((z + _SQRT3) / (2 * _SQRT3), 0.0, 1.0)

    def draw_z(self, rng: np.random.Generator, count: int) -> np.ndarray:
        if self.law == "gaussian":
            return rng.standard_normal((count, self.truncation))
        return rng.uniform(-_SQRT3, _SQRT3, (count, self.truncation))

    @classmethod
    def from_config(cls, cfg: dict) -> "KLMeasure":
        """Build from {"lambda": "j^-2a" | [values], "alpha": a, "J": J, "law": ...}."""
        lam = cfg["lambda"]
        law = cfg.get("law", "gaussian")
        if isinstance(lam, str):
            if lam != "j^-2a":
                raise ValueError(f"unknown eigenvalue rule {lam!r}")
            alpha = float(cfg["alpha"])
            j_max = int(cfg["J"])
            ev = np.arange(1, j_max + 1, dtype=float) ** (-2.0 * alpha)
        else:
            ev = np.asarray(lam, dtype=float)
        return cls(ev, law)


def sample(measure: KLMeasure, seed: int, count: int,
           stream_id: int = STREAM_KL_SAMPLE) -> np.ndarray:
    """(count, J) array of KL coefficients u_j = sqrt(lambda_j) Z_j.

    Deterministic per (seed, stream_id); rows are i.i.d. draws.
    """
    if count < 1:
        raise ValueError("count must be positive")
    rng = stream(seed, stream_id)
    return measure.draw_z(rng, count) * measure.sqrt_ev[None, :]


def synthesize_torus(coeffs: np.ndarray, resolution: int) -> np.ndarray:
    """Realize coefficient rows as functions on the 1-periodic interval.

    Basis: e_1 = 1, e_{2m} = sqrt(2) cos(2 pi m x), e_{2m+1} = sqrt(2)
    sin(2 pi m x) - orthonormal in L^2([0,1]).  For resolution above twice
    the highest mode, the grid mean of u^2 equals sum_j u_j^2 exactly
    (discrete orthogonality of trigonometric polynomials).
    """
    coeffs = np.atleast_2d(np.asarray(coeffs, dtype=float))
    j_max = coeffs.shape[1]
    x = np.arange(resolution) / resolution
    basis = np.empty((j_max, resolution))
    basis[0] = 1.0
    for j in range(1, j_max):
        m = (j + 1) // 2
        phase = 2 * math.pi * m * x
        basis[j] = math.sqrt(2) * (np.cos(phase) if j % 2 == 1 else np.sin(phase))
    return coeffs @ basis


def cdf_map(measure: KLMeasure, coeffs: np.ndarray, dim: int) -> np.ndarray:
    """First dim coordinates of h_d; each is marginally Uniform(0,1)."""
    if dim < 1 or dim > measure.truncation:
        raise DimensionExceedsTruncation(
            f"dim {dim} outside [1, J={measure.truncation}]")
    coeffs = np.atleast_2d(np.asarray(coeffs, dtype=float))
    z = coeffs[:, :dim] / measure.sqrt_ev[None, :dim]
    return measure.cdf(z)


class GridFunction01:
    """Node values on a uniform grid over [0,1]^d with multilinear interpolation."""

    def __init__(self, dim: int, values, lipschitz: Optional[float] = None):
        self.dim = dim
        self.values = np.asarray(values, dtype=float)
        if self.values.ndim != dim:
            raise ValueError(f"values must be {dim}-dimensional")
        res = self.values.shape[0] - 1
        if res < 1 or self.values.shape != (res + 1,) * dim:
            raise ValueError("values must be (res+1)^d node samples")
        self.lipschitz = lipschitz

    @property
    def res(self) -> int:
        return self.values.shape[0] - 1

    @classmethod
    def from_callable(cls, fn: Callable, dim: int, res: int,
                      lipschitz: Optional[float] = None) -> "GridFunction01":
        axes = [np.arange(res + 1) / res] * dim
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=-1)
        vals = np.asarray(fn(pts), dtype=float).reshape((res + 1,) * dim)
        return cls(dim, vals, lipschitz)

    @classmethod
    def constant(cls, value: float, dim: int = 1) -> "GridFunction01":
        return cls(dim, np.full((2,) * dim, float(value)), lipschitz=0.0)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.dim:
            raise ValueError(f"points must have {self.dim} coordinates")
        t = np.clip(x, 0.0, 1.0) * self.res
        i0 = np.minimum(t.astype(int), self.res - 1)
        frac = t - i0
        out = np.zeros(len(x))
        for corner in itertools.product((0, 1), repeat=self.dim):
            w = np.ones(len(x))
            for axis, bit in enumerate(corner):
                w *= frac[:, axis] if bit else 1.0 - frac[:, axis]
            idx = tuple(i0[:, axis] + corner[axis] for axis in range(self.dim))
            out += w * self.values[idx]
        return out

    def quadrature_abs_pow(self, p: float, refine: int = 8) -> float:
        """Midpoint quadrature of |f|^p on a refine-times-finer aligned grid.

        Refined cells sit inside single interpolation cells, so the only
        quadrature error comes from the curvature of |.|^p and shrinks
        like refine^-2.
        """
        m = self.res * refine
        mids = (np.arange(m) + 0.5) / m
        mesh = np.meshgrid(*([mids] * self.dim), indexing="ij")
        pts = np.stack([g.ravel() for g in mesh], axis=-1)
        return float(np.mean(np.abs(self(pts)) ** p))


@dataclass
class EmbeddedFunctional:
    """u -> scale * f(h_d(u)); evaluation stays within scale * range(f)."""

    f: GridFunction01
    measure: KLMeasure
    scale: float = 1.0

    def __post_init__(self):
        if self.f.dim > self.measure.truncation:
            raise DimensionExceedsTruncation(
                f"f needs {self.f.dim} coordinates, measure truncated at "
                f"{self.measure.truncation}")

    @property
    def dim(self) -> int:
        return self.f.dim

    @property
    def lipschitz_bound(self) -> Optional[float]:
        """Declared transport bound scale * lip(f) * L / sqrt(lambda_d)."""
        if self.f.lipschitz is None:
            return None
        lam_d = float(self.measure.eigenvalues[self.dim - 1])
        return abs(self.scale) * self.f.lipschitz * self.measure.density_bound / math.sqrt(lam_d)

    def scaled(self, factor: float) -> "EmbeddedFunctional":
        return EmbeddedFunctional(self.f, self.measure, self.scale * factor)

    def __call__(self, coeffs: np.ndarray) -> np.ndarray:
        return self.scale * self.f(cdf_map(self.measure, coeffs, self.dim))


def embed(f: GridFunction01, measure: KLMeasure) -> EmbeddedFunctional:
    return EmbeddedFunctional(f, measure)


@dataclass(frozen=True)
class McEstimate:
    estimate: float
    stderr: float
    moment: float
    moment_stderr: float
    n_samples: int


def lp_norm_mc(functional: Callable, measure: KLMeasure, p: float,
               n_samples: int, seed: int) -> McEstimate:
    """Monte-Carlo estimate of (E |G(u)|^p)^(1/p) with delta-method stderr."""
    if not 1 <= p < math.inf:
        raise ValueError("p must be finite and >= 1")
    if n_samples < 100:
        raise ValueError("need at least 100 samples")
    coeffs = sample(measure, seed, n_samples, stream_id=STREAM_MC_NORM)
    y = np.abs(np.asarray(functional(coeffs), dtype=float)) ** p
    moment = float(np.mean(y))
    # constant functionals wiggle by ulps through interpolation; that is
    # zero variance, not sampling noise
    if float(np.ptp(y)) <= 1e-14 * (1.0 + float(np.max(np.abs(y)))):
        return McEstimate(moment ** (1.0 / p), 0.0, moment, 0.0, n_samples)
    moment_se = float(np.std(y, ddof=1) / math.sqrt(n_samples))
    estimate = moment ** (1.0 / p)
    if moment > 0:
        stderr = (1.0 / p) * moment ** (1.0 / p - 1.0) * moment_se
    else:
        stderr = 0.0
    return McEstimate(estimate, stderr, moment, moment_se, n_samples)


@dataclass(frozen=True)
class IsometryReport:
    mc_moment: float
    quad_moment: float
    zscore: float
    mc: McEstimate

    @property
    def consistent(self) -> bool:
        return abs(self.zscore) <= 3.0


def isometry_check(f: GridFunction01, measure: KLMeasure, p: float,
                   n_samples: int, seed: int, refine: int = 8) -> IsometryReport:
    """Compare the p-th moment of f o h_d under mu with cube quadrature.

    zscore is on the moment scale; a degenerate stderr with matching sides
    (constant f) reports zscore 0.
    """
    emb = embed(f, measure)
    mc = lp_norm_mc(emb, measure, p, n_samples, seed)
    quad = f.quadrature_abs_pow(p, refine=refine)
    z = moment_zscore(mc.moment, quad, mc.moment_stderr)
    return IsometryReport(mc.moment, quad, z, mc)


def moment_zscore(mc_moment: float, reference: float, stderr: float) -> float:
    """(mc - reference) / stderr, with roundoff-level agreement scoring 0."""
    if abs(mc_moment - reference) <= 1e-12 * (1.0 + abs(reference)):
        return 0.0
    if stderr > 0:
        return (mc_moment - reference) / stderr
    return math.inf if mc_moment > reference else -math.inf


def transport_quotient_max(emb: EmbeddedFunctional, n_pairs: int,
                           seed: int) -> float:
    """Max sampled difference quotient |G(u) - G(v)| / ||u - v||_2."""
    coeffs = sample(emb.measure, seed, 2 * n_pairs, stream_id=STREAM_TRANSPORT)
    u, v = coeffs[:n_pairs], coeffs[n_pairs:]
    num = np.abs(emb(u) - emb(v))
    den = np.linalg.norm(u - v, axis=1)
    keep = den > 0
    if not keep.any():
        return 0.0
    return float(np.max(num[keep] / den[keep]))
