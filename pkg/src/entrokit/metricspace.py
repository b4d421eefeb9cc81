"""Exact and greedy covering/packing numbers on finite metric spaces.

Covering numbers use closed balls: a point at distance exactly eps from a
center counts as covered, and a pair at distance exactly eps counts as
separated.  Exact solvers are branch-and-bound searches limited to
EXACT_LIMIT subset points; larger instances must use the greedy variants,
whose counts bracket the exact values from the correct side.

The minimax code length of a subset A is the fewest bits B for which some
B-bit encoder/decoder pair reconstructs every element of A within eps.
With a decoder free to output any ambient point this equals
ceil(log2 N(A; eps)), realized constructively by indexing a minimal cover.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import SampleMismatch, SizeLimitExceeded

EXACT_LIMIT = 20
VALIDATION_ATOL = 1e-12


class FiniteMetricSpace:
    """A finite point set with an explicit, validated distance matrix."""

    def __init__(self, points: Sequence, dist) -> None:
        self.points = list(points)
        self.dist = np.array(dist, dtype=float)
        n = len(self.points)
        if self.dist.shape != (n, n):
            raise ValueError(f"distance matrix shape {self.dist.shape} != ({n}, {n})")
        if not np.all(np.isfinite(self.dist)):
            raise ValueError("distance matrix contains non-finite entries")
        if np.any(self.dist < -VALIDATION_ATOL):
            raise ValueError("negative distances")
        if np.max(np.abs(np.diagonal(self.dist))) > VALIDATION_ATOL:
            raise ValueError("nonzero diagonal")
        if np.max(np.abs(self.dist - self.dist.T)) > VALIDATION_ATOL:
            raise ValueError("asymmetric distance matrix")
        # triangle inequality, checked for every (i, j, k) via one matrix op per k
        for k in range(n):
            slack = self.dist - (self.dist[:, k][:, None] + self.dist[k, :][None, :])
            if np.max(slack) > VALIDATION_ATOL:
                i, j = np.unravel_index(np.argmax(slack), slack.shape)
                raise ValueError(
                    f"triangle inequality violated for ({i}, {j}, {k}): "
                    f"d={self.dist[i, j]} > {self.dist[i, k] + self.dist[k, j]}"
                )
        self.dist.setflags(write=False)

    @property
    def n(self) -> int:
        return len(self.points)

    @property
    def diameter(self) -> float:
        return float(np.max(self.dist))

    # -- constructors -------------------------------------------------

    @classmethod
    def from_coords(cls, coords, labels=None, metric: str = "euclidean") -> "FiniteMetricSpace":
        coords = np.atleast_2d(np.asarray(coords, dtype=float))
        diff = coords[:, None, :] - coords[None, :, :]
        if metric == "euclidean":
            dist = np.sqrt(np.sum(diff**2, axis=-1))
        elif metric == "chebyshev":
            dist = np.max(np.abs(diff), axis=-1)
        else:
            raise ValueError(f"unknown metric {metric!r}")
        if labels is None:
            labels = list(range(len(coords)))
        return cls(labels, dist)

    @classmethod
    def line(cls, n: int, spacing: float = 1.0) -> "FiniteMetricSpace":
        """n points on a line at the given spacing, d(i, j) = spacing * |i - j|."""
        idx = np.arange(n, dtype=float)
        return cls(list(range(n)), spacing * np.abs(idx[:, None] - idx[None, :]))

    @classmethod
    def circle(cls, n: int, circumference: Optional[float] = None) -> "FiniteMetricSpace":
        """n equispaced points on a circle with the arc-length metric."""
        if circumference is None:
            circumference = float(n)
        step = circumference / n
        idx = np.arange(n)
        hops = np.abs(idx[:, None] - idx[None, :])
        hops = np.minimum(hops, n - hops)
        return cls(list(range(n)), step * hops)

    # -- serialization -------------------------------------------------

    def to_json(self) -> dict:
        return {"points": self.points, "dist": self.dist.tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "FiniteMetricSpace":
        return cls(obj["points"], obj["dist"])

    @classmethod
    def from_file(cls, path) -> "FiniteMetricSpace":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


@dataclass(frozen=True)
class CoverResult:
    centers: tuple
    radius: float
    exact: bool

    @property
    def count(self) -> int:
        return len(self.centers)


@dataclass(frozen=True)
class PackResult:
    members: tuple
    separation: float
    exact: bool

    @property
    def count(self) -> int:
        return len(self.members)


@dataclass(frozen=True)
class SandwichReport:
    eps: float
    m_3eps: int
    n_eps: int
    m_eps: int

    @property
    def holds(self) -> bool:
        return self.m_3eps <= self.n_eps <= self.m_eps


def _resolve(space: FiniteMetricSpace, subset, ambient):
    subset = list(range(space.n)) if subset is None else sorted(set(subset))
    ambient = list(range(space.n)) if ambient is None else sorted(set(ambient))
    if not set(subset) <= set(ambient):
        raise ValueError("subset must be contained in ambient")
    if not subset:
        raise ValueError("empty subset")
    return subset, ambient


def _cover_candidates(space, subset, ambient, eps):
    """One bitmask over subset positions per ambient center, deduplicated.

    Dominated masks (strict subsets of another candidate's coverage) are
    dropped: an optimal cover never needs them, and removal keeps the
    deterministic witness stable.
    """
    sub = np.asarray(subset)
    amb = np.asarray(ambient)
    covered = space.dist[np.ix_(amb, sub)] <= eps
    masks = {}
    for row, center in zip(covered, amb):
        bits = 0
        for pos, c in enumerate(row):
            if c:
                bits |= 1 << pos
        if bits and bits not in masks:
            masks[bits] = int(center)
    items = sorted(masks.items(), key=lambda kv: (-bin(kv[0]).count("1"), kv[1]))
    kept = []
    for bits, center in items:
        if not any(bits | other == other for other, _ in kept):
            kept.append((bits, center))
    return kept


def exact_covering_number(space: FiniteMetricSpace, eps: float,
                          subset=None, ambient=None) -> CoverResult:
    """Minimum number of closed eps-balls with ambient centers covering subset.

    Branch-and-bound set cover; exact, deterministic.  Raises
    SizeLimitExceeded above EXACT_LIMIT subset points (use greedy_covering).
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    subset, ambient = _resolve(space, subset, ambient)
    if len(subset) > EXACT_LIMIT:
        raise SizeLimitExceeded(
            f"exact cover limited to {EXACT_LIMIT} points, got {len(subset)}")
    k = len(subset)
    full = (1 << k) - 1
    candidates = _cover_candidates(space, subset, ambient, eps)
    greedy = greedy_covering(space, eps, subset, ambient)
    best_count = greedy.count
    best_centers = list(greedy.centers)
    max_cover = max(bin(bits).count("1") for bits, _ in candidates)
    # candidates that cover each point, densest first (deterministic order)
    per_point = [[(bits, c) for bits, c in candidates if bits >> pos & 1]
                 for pos in range(k)]

    def recurse(covered, chosen):
        nonlocal best_count, best_centers
        if covered == full:
            if len(chosen) < best_count:
                best_count = len(chosen)
                best_centers = list(chosen)
            return
        remaining = bin(full & ~covered).count("1")
        if len(chosen) + math.ceil(remaining / max_cover) >= best_count:
            return
        # branch on the uncovered point with the fewest candidates
        pos = min((p for p in range(k) if not covered >> p & 1),
                  key=lambda p: len(per_point[p]))
        for bits, center in per_point[pos]:
            chosen.append(center)
            recurse(covered | bits, chosen)
            chosen.pop()

    recurse(0, [])
    return CoverResult(tuple(best_centers), eps, exact=True)


def greedy_covering(space: FiniteMetricSpace, eps: float,
                    subset=None, ambient=None) -> CoverResult:
    """Greedy cover: repeatedly pick the ambient center covering the most
    uncovered subset points, ties broken by lowest center index."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    subset, ambient = _resolve(space, subset, ambient)
    sub = np.asarray(subset)
    amb = np.asarray(ambient)
    covered_by = space.dist[np.ix_(amb, sub)] <= eps
    uncovered = np.ones(len(subset), dtype=bool)
    centers = []
    while uncovered.any():
        gains = (covered_by & uncovered[None, :]).sum(axis=1)
        pick = int(np.argmax(gains))  # argmax returns the first (lowest-index) max
        if gains[pick] == 0:
            raise RuntimeError("uncoverable point; subset not within ambient balls")
        centers.append(int(amb[pick]))
        uncovered &= ~covered_by[pick]
    return CoverResult(tuple(centers), eps, exact=False)


def exact_packing_number(space: FiniteMetricSpace, eps: float,
                         subset=None) -> PackResult:
    """Maximum eps-separated subset: a maximum independent set in the
    conflict graph joining pairs at distance < eps."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    subset, _ = _resolve(space, subset, None)
    if len(subset) > EXACT_LIMIT:
        raise SizeLimitExceeded(
            f"exact packing limited to {EXACT_LIMIT} points, got {len(subset)}")
    k = len(subset)
    sub = np.asarray(subset)
    conflict = (space.dist[np.ix_(sub, sub)] < eps) & ~np.eye(k, dtype=bool)
    adj = [0] * k
    for i in range(k):
        bits = 0
        for j in range(k):
            if conflict[i, j]:
                bits |= 1 << j
        adj[i] = bits

    greedy = greedy_packing(space, eps, subset)
    best = [subset.index(m) for m in greedy.members]
    best_size = len(best)

    def recurse(candidates, chosen):
        nonlocal best, best_size
        if not candidates:
            if len(chosen) > best_size:
                best_size = len(chosen)
                best = list(chosen)
            return
        if len(chosen) + bin(candidates).count("1") <= best_size:
            return
        v = (candidates & -candidates).bit_length() - 1  # lowest candidate index
        chosen.append(v)
        recurse(candidates & ~(1 << v) & ~adj[v], chosen)
        chosen.pop()
        recurse(candidates & ~(1 << v), chosen)

    recurse((1 << k) - 1, [])
    return PackResult(tuple(int(sub[i]) for i in sorted(best)), eps, exact=True)


def greedy_packing(space: FiniteMetricSpace, eps: float, subset=None) -> PackResult:
    """First-fit packing in index order; count <= exact packing number."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    subset, _ = _resolve(space, subset, None)
    members = []
    for i in subset:
        if all(space.dist[i, j] >= eps for j in members):
            members.append(i)
    return PackResult(tuple(members), eps, exact=False)


def sandwich_check(space: FiniteMetricSpace, eps: float,
                   subset=None, ambient=None) -> SandwichReport:
    """Verify M(A; 3 eps) <= N(A; eps) <= M(A; eps) on an exact instance.

    A failing report signals an implementation bug, never a property of
    the space.
    """
    m3 = exact_packing_number(space, 3 * eps, subset)
    ne = exact_covering_number(space, eps, subset, ambient)
    me = exact_packing_number(space, eps, subset)
    return SandwichReport(eps, m3.count, ne.count, me.count)


def minimax_code_length(space: FiniteMetricSpace, eps: float,
                        subset=None, ambient=None,
                        decoder: str = "ambient") -> int:
    """Fewest bits B for an encoder/decoder pair with sup error <= eps.

    decoder="ambient" lets the decoder output any ambient point (the
    default); decoder="restricted" confines decoder outputs to the subset
    itself, which can only increase the covering number and hence B.
    """
    if decoder not in ("ambient", "restricted"):
        raise ValueError(f"unknown decoder mode {decoder!r}")
    subset, ambient = _resolve(space, subset, ambient)
    centers = ambient if decoder == "ambient" else subset
    n = exact_covering_number(space, eps, subset, centers).count
    return (n - 1).bit_length()


def code_length_report(space: FiniteMetricSpace, eps: float,
                       subset=None, ambient=None) -> dict:
    """Covering number, entropy, and code length in both decoder modes."""
    n = exact_covering_number(space, eps, subset, ambient).count
    return {
        "N": n,
        "H": math.log2(n),
        "B": (n - 1).bit_length(),
        "B_restricted": minimax_code_length(space, eps, subset, ambient,
                                            decoder="restricted"),
    }


# -- functional dictionaries ------------------------------------------


@dataclass(frozen=True)
class SampledFunctional:
    """A real-valued map known on a declared finite sample of its domain."""

    sample_ids: tuple
    values: np.ndarray = field(compare=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (len(self.sample_ids),):
            raise ValueError("values must be one per sample id")
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class LpSampleNorm:
    """Weighted discrete L^p norm on a sample set; weights sum to the mass."""

    p: float
    weights: tuple

    def __call__(self, delta: np.ndarray) -> float:
        w = np.asarray(self.weights, dtype=float)
        return float(np.sum(w * np.abs(delta) ** self.p) ** (1.0 / self.p))


def _norm_fn(norm) -> Callable[[np.ndarray], float]:
    if norm == "sup":
        return lambda delta: float(np.max(np.abs(delta)))
    if isinstance(norm, LpSampleNorm):
        return norm
    raise ValueError(f"unknown norm {norm!r}")


def dictionary_minimax_error(targets: Sequence[SampledFunctional],
                             dictionary: Sequence[SampledFunctional],
                             norm="sup") -> float:
    """sup over targets of the min dictionary distance in the chosen norm."""
    if not targets or not dictionary:
        raise ValueError("targets and dictionary must be nonempty")
    ids = targets[0].sample_ids
    for f in itertools.chain(targets, dictionary):
        if f.sample_ids != ids:
            raise SampleMismatch("functionals sampled on different sets")
    dist = _norm_fn(norm)
    dict_values = np.stack([g.values for g in dictionary])
    worst = 0.0
    for f in targets:
        best = min(dist(f.values - row) for row in dict_values)
        worst = max(worst, best)
    return worst
