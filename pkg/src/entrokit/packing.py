"""Explicit packing families of 1-Lipschitz functionals.

Three constructions:

* Hat families on a finite metric space K: from N centers at pairwise
  distance >= 6 eps, the 2^N sign combinations of the hat functions
  psi_j(u) = max(3 eps - d(u, u_j), 0) are 3 eps-separated in sup norm.
  That certifies log2 of the packing number of the unit Lipschitz ball
  over K to be at least N, and N dominates the 6 eps covering number of
  K (2 to its entropy) whenever the packing is exact.

* Greedy sign codes: lexicographic scan of {+1, -1}^n keeping words at
  Hamming distance >= ceil(n/4) from everything kept so far reaches size
  ceil(e^(n/8)); classical volume counting guarantees feasibility.

* Bump families on [0,1]^d: the cube is split into N^d cells, each
  carrying a plateau bump with linear ramp (width lam/2 in the max-norm
  distance to the cell boundary).  Signed combinations indexed by a sign
  code are 1-Lipschitz with pairwise L^1 distance >= lam (1-lam)^d / (4N),
  which at lam = 1/(1+d) is at least 1/(8 e d N).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import (BoundNotReached, EpsilonTooLarge, FamilyTooLarge,
                     GridMisaligned, NoPacking)
from .metricspace import (EXACT_LIMIT, FiniteMetricSpace, SampledFunctional,
                          exact_packing_number, greedy_packing)
from .rng import STREAM_HAT_PAIRS, stream

HAT_MAX_LOG2_MEMBERS = 16
PAIRWISE_EXHAUSTIVE_LOG2 = 10
PAIRWISE_SAMPLE = 1000
QUADRATURE_TOL = 1e-9


# ---------------------------------------------------------------------
# hat families
# ---------------------------------------------------------------------


@dataclass(frozen=True)
class HatFamilyReport:
    size: int
    min_pairwise_supdist: float
    pairwise_exhaustive: bool
    sup_max: float
    lipschitz_max: float
    separation_ok: bool
    sup_ok: bool
    lipschitz_ok: bool

    @property
    def ok(self) -> bool:
        return self.separation_ok and self.sup_ok and self.lipschitz_ok


class HatFamily:
    """2^N signed sums of hat functions on a finite metric space."""

    def __init__(self, space: FiniteMetricSpace, eps: float, centers: Sequence[int]):
        self.space = space
        self.eps = float(eps)
        self.centers = tuple(int(c) for c in centers)
        # psi[j, u] = max(3 eps - d(c_j, u), 0), evaluated on every space point
        self.psi = np.maximum(3 * self.eps - space.dist[list(self.centers), :], 0.0)

    @property
    def n_centers(self) -> int:
        return len(self.centers)

    @property
    def size(self) -> int:
        return 1 << self.n_centers

    def member(self, sigma) -> np.ndarray:
        """Values of f_sigma on all space points for sigma in {0,1}^N."""
        sigma = np.asarray(sigma, dtype=float)
        return sigma @ self.psi

    def member_functional(self, sigma) -> SampledFunctional:
        return SampledFunctional(tuple(self.space.points), self.member(sigma))

    def all_member_values(self) -> np.ndarray:
        """(2^N, n_points) matrix of member values, sigma enumerated by bits."""
        n = self.n_centers
        sigmas = ((np.arange(self.size)[:, None] >> np.arange(n)[None, :]) & 1)
        return sigmas.astype(float) @ self.psi

    def min_pairwise_supdist(self, seed: int = 0):
        """(min pairwise sup distance, exhaustive flag).

        Exhaustive for families up to 2^PAIRWISE_EXHAUSTIVE_LOG2 members,
        otherwise PAIRWISE_SAMPLE random distinct pairs.
        """
        values = self.all_member_values()
        s = len(values)
        if s <= (1 << PAIRWISE_EXHAUSTIVE_LOG2):
            best = math.inf
            for i in range(s - 1):
                d = np.max(np.abs(values[i + 1:] - values[i]), axis=1)
                best = min(best, float(np.min(d)))
            return best, True
        rng = stream(seed, STREAM_HAT_PAIRS)
        best = math.inf
        for _ in range(PAIRWISE_SAMPLE):
            i, j = rng.choice(s, size=2, replace=False)
            best = min(best, float(np.max(np.abs(values[i] - values[j]))))
        return best, False

    def verify(self, seed: int = 0, tol: float = 1e-12) -> HatFamilyReport:
        values = self.all_member_values()
        sup_max = float(np.max(np.abs(values)))
        iu, ju = np.triu_indices(self.space.n, k=1)
        d = self.space.dist[iu, ju]
        keep = d > 0
        lip_max = 0.0
        if keep.any():
            ik, jk, dk = iu[keep], ju[keep], d[keep]
            for lo in range(0, len(values), 1024):  # bounded memory at N = 16
                block = values[lo:lo + 1024]
                quotients = np.abs(block[:, ik] - block[:, jk]) / dk
                lip_max = max(lip_max, float(np.max(quotients)))
        min_pair, exhaustive = self.min_pairwise_supdist(seed)
        return HatFamilyReport(
            size=len(values),
            min_pairwise_supdist=min_pair,
            pairwise_exhaustive=exhaustive,
            sup_max=sup_max,
            lipschitz_max=lip_max,
            separation_ok=min_pair >= 3 * self.eps - tol,
            sup_ok=sup_max <= min(3 * self.eps, 1.0) + tol,
            lipschitz_ok=lip_max <= 1.0 + tol,
        )

    def manifest(self) -> dict:
        return {
            "eps": self.eps,
            "n_centers": self.n_centers,
            "size": self.size,
            "centers": [self.space.points[c] for c in self.centers],
            "center_indices": list(self.centers),
        }


def build_hat_family(space: FiniteMetricSpace, eps: float) -> HatFamily:
    """Build the hat family at accuracy eps from a 6 eps-separated center set.

    Centers come from the exact packing when the space is small enough,
    otherwise from the deterministic greedy packing.
    """
    if not 0 < eps <= 1.0 / 3.0:
        raise EpsilonTooLarge(f"eps must lie in (0, 1/3], got {eps}")
    sep = 6 * eps
    if space.n <= EXACT_LIMIT:
        pack = exact_packing_number(space, sep)
    else:
        pack = greedy_packing(space, sep)
    if pack.count < 2:
        raise NoPacking(f"no two points are {sep}-separated")
    if pack.count > HAT_MAX_LOG2_MEMBERS:
        raise FamilyTooLarge(
            f"2^{pack.count} members exceeds the 2^{HAT_MAX_LOG2_MEMBERS} cap")
    return HatFamily(space, eps, pack.members)


# ---------------------------------------------------------------------
# greedy sign codes
# ---------------------------------------------------------------------


@dataclass(frozen=True)
class SignCode:
    """Sign vectors in {-1,+1}^length with a verified minimum Hamming distance."""

    length: int
    ints: tuple          # kept candidates in scan order, bit=1 encodes -1
    min_distance: int    # required pairwise Hamming distance
    target_size: int

    @property
    def size(self) -> int:
        return len(self.ints)

    @property
    def words(self) -> np.ndarray:
        """(size, length) array of +-1 entries; coordinate 0 is the top bit."""
        shifts = np.arange(self.length - 1, -1, -1, dtype=np.uint64)
        bits = (np.array(self.ints, dtype=np.uint64)[:, None] >> shifts[None, :]) & 1
        return (1 - 2 * bits.astype(np.int8))

    def pairwise_min_hamming(self) -> int:
        ints = np.array(self.ints, dtype=np.uint64)
        best = self.length
        for i in range(len(ints) - 1):
            d = np.bitwise_count(ints[i + 1:] ^ ints[i])
            best = min(best, int(d.min()))
        return best

    def hamming_matrix(self) -> np.ndarray:
        ints = np.array(self.ints, dtype=np.uint64)
        return np.bitwise_count(ints[:, None] ^ ints[None, :]).astype(int)

    def manifest(self) -> dict:
        return {
            "length": self.length,
            "size": self.size,
            "min_distance": self.min_distance,
            "target_size": self.target_size,
            "words": ["".join("+" if w > 0 else "-" for w in row) for row in self.words],
        }


def _greedy_sign_code(n: int, min_dist: int, target: int,
                      chunk: int = 1 << 15) -> SignCode:
    """Lexicographic greedy scan of {+1,-1}^n (all +1 first, +1 as 0-bit)."""
    kept = [0]  # the all-(+1) word; vacuously at distance >= min_dist
    total = 1 << n
    start = 1
    while len(kept) < target and start < total:
        end = min(start + chunk, total)
        cand = start + np.arange(end - start, dtype=np.uint64)
        kept_arr = np.array(kept, dtype=np.uint64)
        ok = (np.bitwise_count(cand[:, None] ^ kept_arr[None, :]) >= min_dist).all(axis=1)
        while ok.any() and len(kept) < target:
            pos = int(np.argmax(ok))
            word = int(cand[pos])
            kept.append(word)
            ok[: pos + 1] = False
            ok &= np.bitwise_count(cand ^ np.uint64(word)) >= min_dist
        start = end
    if len(kept) < target:
        raise BoundNotReached(
            f"greedy scan kept {len(kept)} < {target} words; "
            "this contradicts the volume bound and signals a bug")
    return SignCode(n, tuple(kept), min_dist, target)


def greedy_sign_code(length: int, min_distance: int,
                     target_size: int) -> SignCode:
    """Greedy code with explicit distance and size targets; no range gate,
    so degenerate short lengths (distance-1 codes) are allowed."""
    if not 1 <= length <= 64:
        raise ValueError(f"length must lie in [1, 64], got {length}")
    if min_distance < 1 or target_size < 1:
        raise ValueError("min_distance and target_size must be >= 1")
    return _greedy_sign_code(length, min_distance, target_size)


def volume_bound_code(n: int) -> SignCode:
    """Code of length n at distance ceil(n/4) and size ceil(e^(n/8)), the
    combination the volume bound guarantees for any n."""
    return greedy_sign_code(n, math.ceil(n / 4), math.ceil(math.exp(n / 8)))


def gilbert_varshamov(n: int) -> SignCode:
    """Greedy code of length n with Hamming distance >= ceil(n/4) and size
    >= ceil(e^(n/8)).  Deterministic; the scan may be slow near n = 64."""
    if not 4 <= n <= 64:
        raise ValueError(f"n must lie in [4, 64], got {n}")
    return volume_bound_code(n)


# ---------------------------------------------------------------------
# bump families on [0,1]^d
# ---------------------------------------------------------------------


@dataclass(frozen=True)
class BumpFamilyReport:
    size: int
    cell_profile_l1: float       # integral of the unit-cell profile over the cube
    profile_l1_lower: float      # (1 - lam)^d plateau volume
    min_pairwise_l1: float
    pairwise_lower: float        # lam (1-lam)^d / (4 N)
    l1_floor: float              # 1 / (8 e d N), valid at lam = 1/(1+d)
    sup_max: float
    lipschitz_max: float

    @property
    def ok(self) -> bool:
        return (self.cell_profile_l1 >= self.profile_l1_lower - QUADRATURE_TOL
                and self.sup_max <= 1.0 + QUADRATURE_TOL
                and self.lipschitz_max <= 1.0 + QUADRATURE_TOL
                and self.min_pairwise_l1 >= self.pairwise_lower - QUADRATURE_TOL)


class BumpFamily:
    """Signed plateau-bump combinations f_sigma = (lam / 2N) sum sigma_j phi_j."""

    def __init__(self, dim: int, cells: int, grid_res: int, code: SignCode,
                 lam: float):
        self.dim = dim
        self.cells = cells
        self.grid_res = grid_res
        self.code = code
        self.lam = lam
        self.scale = lam / (2 * cells)
        self._cell_l1 = self._cell_quadrature()

    # -- evaluation ----------------------------------------------------

    def _profile(self, local: np.ndarray) -> np.ndarray:
        """Unit-cell profile: 1 on the plateau, linear ramp of width lam/2
        in the sup-norm distance to the cell boundary, 0 on the boundary."""
        r = np.max(np.abs(local - 0.5), axis=-1)
        return np.clip((0.5 - r) / (self.lam / 2), 0.0, 1.0)

    def member_values(self, index: int, x: np.ndarray) -> np.ndarray:
        """f_sigma at points x in [0,1]^d for the index-th code word."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        word = self.code.words[index]
        cell = np.minimum((x * self.cells).astype(int), self.cells - 1)
        local = x * self.cells - cell
        flat = np.ravel_multi_index(cell.T, (self.cells,) * self.dim)
        return self.scale * word[flat] * self._profile(local)

    def member_on_nodes(self, index: int) -> np.ndarray:
        """Member values on the (grid_res+1)^d node grid, as a d-dim array."""
        pts = self._node_points()
        return self.member_values(index, pts).reshape((self.grid_res + 1,) * self.dim)

    def _node_points(self) -> np.ndarray:
        axes = [np.arange(self.grid_res + 1) / self.grid_res] * self.dim
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    # -- quadrature ----------------------------------------------------

    def _cell_quadrature(self) -> float:
        """Midpoint quadrature of one scaled bump over its cell.

        Quadrature cells align with the ramp breakpoints, so for d = 1 the
        value is exact up to roundoff; the same per-cell value serves every
        cell by translation invariance of the construction.
        """
        per_cell = self.grid_res // self.cells
        mids = (np.arange(per_cell) + 0.5) / per_cell
        mesh = np.meshgrid(*([mids] * self.dim), indexing="ij")
        local = np.stack([m.ravel() for m in mesh], axis=-1)
        cell_volume = self.cells ** (-self.dim)
        return float(np.mean(self._profile(local)) * cell_volume)

    @property
    def cell_profile_l1(self) -> float:
        """Quadrature of the unit-cell profile over the whole unit cube."""
        return self._cell_l1 * self.cells**self.dim

    def pairwise_l1(self, i: int, j: int) -> float:
        """L^1 distance between members i and j (disjoint supports make the
        quadrature collapse to a Hamming count times the per-cell mass)."""
        d = int(np.bitwise_count(np.uint64(self.code.ints[i] ^ self.code.ints[j])))
        return self.scale * 2 * d * self._cell_l1

    def min_pairwise_l1(self) -> float:
        h = self.code.hamming_matrix()
        h_min = int(np.min(h[np.triu_indices(len(h), k=1)]))
        return self.scale * 2 * h_min * self._cell_l1

    # -- member checks ---------------------------------------------------

    def member_sup(self, index: int) -> float:
        return float(np.max(np.abs(self.member_on_nodes(index))))

    def member_discrete_lipschitz(self, index: int) -> float:
        """Max grid difference quotient w.r.t. the sup norm; all node pairs
        for grid_res <= 64, axis-neighbor quotients otherwise."""
        vals = self.member_on_nodes(index)
        if self.grid_res <= 64:
            pts = self._node_points()
            flat = vals.ravel()
            best = 0.0
            for i in range(0, len(flat), 512):
                block = slice(i, min(i + 512, len(flat)))
                dx = np.max(np.abs(pts[block, None, :] - pts[None, :, :]), axis=-1)
                df = np.abs(flat[block, None] - flat[None, :])
                mask = dx > 0
                if mask.any():
                    best = max(best, float(np.max(df[mask] / dx[mask])))
            return best
        h = 1.0 / self.grid_res
        best = 0.0
        for axis in range(self.dim):
            diff = np.abs(np.diff(vals, axis=axis)) / h
            best = max(best, float(np.max(diff)))
        return best

    @property
    def pairwise_lower(self) -> float:
        return self.lam * (1 - self.lam) ** self.dim / (4 * self.cells)

    @property
    def l1_floor(self) -> float:
        return 1.0 / (8 * math.e * self.dim * self.cells)

    def verify(self) -> BumpFamilyReport:
        sup_max = max(self.member_sup(i) for i in range(self.code.size))
        lip_max = max(self.member_discrete_lipschitz(i) for i in range(self.code.size))
        return BumpFamilyReport(
            size=self.code.size,
            cell_profile_l1=self.cell_profile_l1,
            profile_l1_lower=(1 - self.lam) ** self.dim,
            min_pairwise_l1=self.min_pairwise_l1(),
            pairwise_lower=self.pairwise_lower,
            l1_floor=self.l1_floor,
            sup_max=sup_max,
            lipschitz_max=lip_max,
        )

    def manifest(self) -> dict:
        return {
            "dim": self.dim,
            "cells_per_axis": self.cells,
            "lam": self.lam,
            "grid_res": self.grid_res,
            "code": self.code.manifest(),
        }


def build_bump_family(dim: int, cells: int, grid_res: int, code: SignCode,
                      lam: Optional[float] = None) -> BumpFamily:
    """Assemble the bump family; grid_res must put every ramp breakpoint on
    a grid node (a multiple of 2 N (d+1) suffices at the default lam)."""
    if dim not in (1, 2, 3):
        raise ValueError("dim must be 1, 2 or 3")
    if cells < 2:
        raise ValueError("cells must be >= 2")
    if code.length != cells**dim:
        raise ValueError(f"code length {code.length} != {cells}^{dim}")
    if lam is None:
        lam = 1.0 / (1 + dim)
    if not 0 < lam < 1:
        raise ValueError("lam must lie in (0, 1)")
    if grid_res % cells != 0:
        raise GridMisaligned(f"grid_res {grid_res} not a multiple of {cells}")
    breakpoint_steps = grid_res * lam / (2 * cells)
    if abs(breakpoint_steps - round(breakpoint_steps)) > 1e-9:
        raise GridMisaligned(
            f"ramp breakpoints at lam/(2N) = {lam / (2 * cells)} off the "
            f"1/{grid_res} grid")
    return BumpFamily(dim, cells, grid_res, code, lam)


# ---------------------------------------------------------------------
# dimension selection and the uniform-setting prediction
# ---------------------------------------------------------------------


def select_embedding_dimension(eps: float, c1: float, c2: float,
                               alpha: float) -> int:
    """Largest d with eps * d^(1+alpha) <= c2, where c2 = c1 e^(-beta).

    The returned d also satisfies c2 < eps (2d)^(1+alpha) and the growth
    bound beta d > c eps^(-1/(1+alpha)) with c = beta c2^(1/(1+alpha)) / 2,
    the constant the two defining inequalities actually imply; all three
    are re-verified in 50-digit arithmetic.
    """
    if not (c1 > c2 > 0):
        raise ValueError("need c1 > c2 > 0 so that beta = ln(c1/c2) > 0")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if eps <= 0:
        raise ValueError("eps must be positive")
    if eps > c2:
        raise EpsilonTooLarge(f"eps = {eps} exceeds eps_0 = c2 = {c2}")

    import mpmath as mp

    with mp.workdps(50):
        # shortest-decimal reading, so 0.01 means 1/100 and not its binary
        # neighbor; boundary cases like eps * d^(1+alpha) == c2 then resolve
        # the way the decimal inputs intend
        e, a, bound = (mp.mpf(repr(float(v))) for v in (eps, alpha, c2))
        d = int(mp.floor((bound / e) ** (1 / (1 + a))))
        d = max(d, 1)
        while e * mp.mpf(d + 1) ** (1 + a) <= bound:
            d += 1
        while d > 1 and e * mp.mpf(d) ** (1 + a) > bound:
            d -= 1
        beta = mp.log(mp.mpf(repr(float(c1))) / bound)
        c = beta * bound ** (1 / (1 + a)) / 2
        ok = (e * mp.mpf(d) ** (1 + a) <= bound
              and bound < e * mp.mpf(2 * d) ** (1 + a)
              and beta * d > c * e ** (-1 / (1 + a)))
        if not ok:
            raise RuntimeError(f"dimension selection self-check failed at d={d}")
    return d


def entropy_lower_bound_uniform(entropy_6eps: float) -> float:
    """Predicted lower bound 2^H(K; 6 eps) for the Lipschitz-class entropy."""
    if entropy_6eps < 0:
        raise ValueError("entropy must be nonnegative")
    return 2.0**entropy_6eps
