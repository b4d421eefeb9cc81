"""Output-averaged Fourier neural operator on periodic grids.

The operator composes a linear lifting, hidden layers
v -> act(W v + K v + b) with K a truncated Fourier multiplier, and a
linear projection followed by the spatial mean, so outputs are scalars.

Parameter layout.  The flat vector theta is ordered
(projection, layer L, ..., layer 1, lifting); each hidden layer holds the
pointwise matrix W (d_c x d_c), the multiplier block, and the bias.  With
constant bias the total length equals the declared parameter dimension

    q = d_c d_in + L (d_c^2 + (2 kappa)^d d_c^2 + d_c) + d_c d_out,

which is bracketed by q <= 5 (2 kappa)^d L d_c^2 <= 5 q.

Multiplier storage.  The multiplier is constrained to act as a
conjugate-symmetric tensor so real inputs produce real outputs.  Per
matrix entry the block carries (2 kappa)^d real slots: one real slot for
the zero mode, an (re, im) pair for every canonical nonzero mode with
|k|_inf < kappa (canonical = first nonzero coordinate positive; the
opposite mode is the conjugate), and structurally inert trailing slots
that pad the active (2 kappa - 1)^d values up to the declared count.
Inert slots never influence the forward pass.

Bias.  "constant" (the default) stores d_c reals added pointwise and is
what the parameter-count formula assumes; "spectral" stores one
multiplier-style slot block per channel and adds the synthesized field,
at the cost of a longer theta and of translation invariance.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import ndtr

from .errors import (ChannelMismatch, IncompatibleDepth, ResolutionTooLow,
                     TargetTooSmall)
from .rng import STREAM_FNO_PROBE, STREAM_INPUT_GEN, stream

# activation -> (function, Lipschitz constant used in bound propagation)
ACTIVATIONS = {
    "relu": (lambda x: np.maximum(x, 0.0), 1.0),
    # gelu(x) = x Phi(x); max slope Phi(sqrt 2) + sqrt 2 phi(sqrt 2) = 1.12892...
    "gelu": (lambda x: x * ndtr(x), 1.129),
    "identity": (lambda x: x, 1.0),
}


@dataclass(frozen=True)
class FnoHyper:
    dim: int
    d_in: int
    d_out: int
    d_c: int
    kappa: int
    depth: int
    activation: str = "relu"
    bias_mode: str = "constant"

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError("dim must be 1, 2 or 3")
        if min(self.d_in, self.d_out, self.d_c, self.kappa, self.depth) < 1:
            raise ValueError("channel counts, cutoff and depth must be >= 1")
        if self.d_c < max(self.d_in, self.d_out):
            raise ValueError("hidden width d_c must be >= max(d_in, d_out)")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.bias_mode not in ("constant", "spectral"):
            raise ValueError(f"unknown bias mode {self.bias_mode!r}")

    @property
    def n_mode_slots(self) -> int:
        return (2 * self.kappa) ** self.dim

    @property
    def default_resolution(self) -> int:
        # headroom for one activation-induced spectral broadening
        return 4 * self.kappa

    def to_json(self) -> dict:
        return {"dim": self.dim, "d_in": self.d_in, "d_out": self.d_out,
                "d_c": self.d_c, "kappa": self.kappa, "depth": self.depth,
                "activation": self.activation, "bias_mode": self.bias_mode}

    @classmethod
    def from_json(cls, obj: dict) -> "FnoHyper":
        return cls(**obj)


@dataclass(frozen=True)
class ParamCount:
    q: int
    bound: int  # 5 (2 kappa)^d L d_c^2

    @property
    def bracketing_holds(self) -> bool:
        return self.q <= self.bound <= 5 * self.q


def param_count(hyper: FnoHyper) -> ParamCount:
    """Declared parameter dimension and its universal bracketing bound."""
    per_layer = hyper.d_c**2 + hyper.n_mode_slots * hyper.d_c**2 + hyper.d_c
    q = hyper.d_c * hyper.d_in + hyper.depth * per_layer + hyper.d_c * hyper.d_out
    bound = 5 * hyper.n_mode_slots * hyper.depth * hyper.d_c**2
    pc = ParamCount(q, bound)
    if not pc.bracketing_holds:
        raise RuntimeError(f"parameter bracketing violated for {hyper}")
    return pc


def canonical_modes(dim: int, kappa: int) -> List[Tuple[int, ...]]:
    """Nonzero modes |k|_inf < kappa with positive first nonzero coordinate."""
    axis = range(-(kappa - 1), kappa)
    modes = []
    for k in itertools.product(axis, repeat=dim):
        nz = next((c for c in k if c != 0), 0)
        if nz > 0:
            modes.append(k)
    return sorted(modes)


def _bias_len(hyper: FnoHyper) -> int:
    if hyper.bias_mode == "constant":
        return hyper.d_c
    return hyper.n_mode_slots * hyper.d_c


def layout_length(hyper: FnoHyper) -> int:
    per_layer = (hyper.d_c**2 + hyper.n_mode_slots * hyper.d_c**2
                 + _bias_len(hyper))
    return (hyper.d_out * hyper.d_c + hyper.depth * per_layer
            + hyper.d_c * hyper.d_in)


class FnoParams:
    """Flat parameter vector bound to a hyperparameter tuple."""

    def __init__(self, hyper: FnoHyper, theta):
        self.hyper = hyper
        self.theta = np.asarray(theta, dtype=float).copy()
        expected = layout_length(hyper)
        if self.theta.shape != (expected,):
            raise ValueError(
                f"theta has length {self.theta.shape}, layout needs {expected}")
        if hyper.bias_mode == "constant":
            assert expected == param_count(hyper).q

    # -- structured access ----------------------------------------------

    def blocks(self):
        """(Q, layers, P) with layers in application order 1..L."""
        h = self.hyper
        dc, nm = h.d_c, h.n_mode_slots
        t = self.theta
        pos = 0

        def take(count, shape):
            nonlocal pos
            block = t[pos:pos + count].reshape(shape)
            pos += count
            return block

        q_mat = take(h.d_out * dc, (h.d_out, dc))
        layers = []
        for _ in range(h.depth):
            w = take(dc * dc, (dc, dc))
            mult = take(nm * dc * dc, (nm, dc, dc))
            if h.bias_mode == "constant":
                bias = take(dc, (dc,))
            else:
                bias = take(nm * dc, (nm, dc))
            layers.append((w, mult, bias))
        p_mat = take(dc * h.d_in, (dc, h.d_in))
        assert pos == len(t)
        layers.reverse()  # stored L..1, applied 1..L
        return q_mat, layers, p_mat

    @classmethod
    def pack(cls, hyper: FnoHyper, q_mat, layers, p_mat) -> "FnoParams":
        """Inverse of blocks(); layers given in application order 1..L."""
        parts = [np.asarray(q_mat, dtype=float).reshape(-1)]
        for w, mult, bias in reversed(list(layers)):
            parts.append(np.asarray(w, dtype=float).reshape(-1))
            parts.append(np.asarray(mult, dtype=float).reshape(-1))
            parts.append(np.asarray(bias, dtype=float).reshape(-1))
        parts.append(np.asarray(p_mat, dtype=float).reshape(-1))
        return cls(hyper, np.concatenate(parts))

    @classmethod
    def zeros(cls, hyper: FnoHyper) -> "FnoParams":
        return cls(hyper, np.zeros(layout_length(hyper)))

    @classmethod
    def random(cls, hyper: FnoHyper, box: float, rng: np.random.Generator,
               canonical: bool = True) -> "FnoParams":
        theta = rng.uniform(-box, box, layout_length(hyper))
        if canonical:
            theta = theta * active_mask(hyper)
        return cls(hyper, theta)


def active_mask(hyper: FnoHyper) -> np.ndarray:
    """Boolean mask of slots that influence the forward pass."""
    n_active_slots = 1 + 2 * len(canonical_modes(hyper.dim, hyper.kappa))
    slot_mask = np.zeros(hyper.n_mode_slots, dtype=bool)
    slot_mask[:n_active_slots] = True
    dc = hyper.d_c
    parts = [np.ones(hyper.d_out * dc, dtype=bool)]
    for _ in range(hyper.depth):
        parts.append(np.ones(dc * dc, dtype=bool))
        parts.append(np.repeat(slot_mask, dc * dc))
        if hyper.bias_mode == "constant":
            parts.append(np.ones(dc, dtype=bool))
        else:
            parts.append(np.repeat(slot_mask, dc))
    parts.append(np.ones(dc * hyper.d_in, dtype=bool))
    return np.concatenate(parts)


# ---------------------------------------------------------------------
# grid functions
# ---------------------------------------------------------------------


@dataclass
class GridFunction:
    """Real channel-valued samples on the n^d periodic torus grid."""

    dim: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != self.dim + 1:
            raise ValueError("values must have shape (n,)*dim + (channels,)")
        n = self.values.shape[0]
        if self.values.shape[:self.dim] != (n,) * self.dim:
            raise ValueError("grid must be cubic")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("non-finite grid values")

    @property
    def resolution(self) -> int:
        return self.values.shape[0]

    @property
    def channels(self) -> int:
        return self.values.shape[-1]

    def shifted(self, offsets: Sequence[int]) -> "GridFunction":
        vals = self.values
        for axis, off in enumerate(offsets):
            vals = np.roll(vals, off, axis=axis)
        return GridFunction(self.dim, vals)

    def to_json(self) -> dict:
        return {"dim": self.dim, "resolution": self.resolution,
                "channels": self.channels, "values": self.values.ravel().tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "GridFunction":
        n, c, d = obj["resolution"], obj["channels"], obj["dim"]
        vals = np.asarray(obj["values"], dtype=float).reshape((n,) * d + (c,))
        return cls(d, vals)


def random_grid_function(dim: int, resolution: int, channels: int,
                         rng: np.random.Generator,
                         normalize: bool = True) -> GridFunction:
    """Gaussian node values, optionally sup-normalized to the unit ball."""
    vals = rng.standard_normal((resolution,) * dim + (channels,))
    if normalize:
        peak = np.max(np.abs(vals))
        if peak > 0:
            vals = vals / peak
    return GridFunction(dim, vals)


def random_inputs(hyper: FnoHyper, count: int, seed: int,
                  resolution: Optional[int] = None) -> List[GridFunction]:
    """Deterministic sup-normalized input family for probes and sweeps."""
    rng = stream(seed, STREAM_INPUT_GEN)
    n = resolution or hyper.default_resolution
    return [random_grid_function(hyper.dim, n, hyper.d_in, rng)
            for _ in range(count)]


def bandlimited_sampler(dim: int, channels: int, max_mode: int,
                        rng: np.random.Generator) -> Callable[[int], GridFunction]:
    """Random real band-limited function, samplable at any resolution.

    Coefficients are drawn once for modes |k|_inf < max_mode; calling the
    sampler evaluates the same continuum function on an n^d grid, so two
    resolutions represent identical inputs.
    """
    modes = [(0,) * dim] + canonical_modes(dim, max_mode)
    coeffs = (rng.standard_normal((len(modes), channels))
              + 1j * rng.standard_normal((len(modes), channels)))
    coeffs[0] = coeffs[0].real  # zero mode must be real

    def at_resolution(n: int) -> GridFunction:
        grid_coeff = np.zeros((n,) * dim + (channels,), dtype=complex)
        for (k, c) in zip(modes, coeffs):
            idx = tuple(ki % n for ki in k)
            grid_coeff[idx] = c
            if any(k):
                grid_coeff[tuple(-ki % n for ki in k)] = np.conj(c)
        vals = np.real(np.fft.ifftn(grid_coeff, axes=tuple(range(dim)),
                                    norm="forward"))
        return GridFunction(dim, vals)

    return at_resolution


# ---------------------------------------------------------------------
# forward evaluation
# ---------------------------------------------------------------------


def _apply_multiplier(vhat: np.ndarray, mult: np.ndarray,
                      modes: List[Tuple[int, ...]], dim: int) -> np.ndarray:
    """y_hat(k) = M_k v_hat(k) on active modes, conjugate pair mirrored."""
    n = vhat.shape[0]
    out = np.zeros_like(vhat)
    zero = (0,) * dim
    out[zero] = vhat[zero] @ mult[0].T
    for t, k in enumerate(modes):
        mk = mult[1 + 2 * t] + 1j * mult[2 + 2 * t]
        idx = tuple(ki % n for ki in k)
        nidx = tuple(-ki % n for ki in k)
        out[idx] = vhat[idx] @ mk.T
        out[nidx] = vhat[nidx] @ np.conj(mk).T
    return out


def _bias_field(bias: np.ndarray, modes, dim: int, n: int) -> np.ndarray:
    """Synthesize the spectral bias function on the n^d grid."""
    dc = bias.shape[-1]
    coeff = np.zeros((n,) * dim + (dc,), dtype=complex)
    coeff[(0,) * dim] = bias[0]
    for t, k in enumerate(modes):
        c = bias[1 + 2 * t] + 1j * bias[2 + 2 * t]
        coeff[tuple(ki % n for ki in k)] = c
        coeff[tuple(-ki % n for ki in k)] = np.conj(c)
    return np.real(np.fft.ifftn(coeff, axes=tuple(range(dim)), norm="forward"))


def forward(params: FnoParams, u: GridFunction) -> float:
    """Lift, apply hidden layers, project, and spatially average."""
    h = params.hyper
    if u.dim != h.dim:
        raise ChannelMismatch(f"input dim {u.dim} != architecture dim {h.dim}")
    if u.channels != h.d_in:
        raise ChannelMismatch(f"input channels {u.channels} != d_in {h.d_in}")
    if h.d_out != 1:
        raise ChannelMismatch("output-averaged forward requires d_out = 1")
    if u.resolution < 2 * h.kappa:
        raise ResolutionTooLow(
            f"resolution {u.resolution} < 2 kappa = {2 * h.kappa}")
    act = ACTIVATIONS[h.activation][0]
    modes = canonical_modes(h.dim, h.kappa)
    axes = tuple(range(h.dim))
    q_mat, layers, p_mat = params.blocks()

    v = u.values @ p_mat.T
    for w_mat, mult, bias in layers:
        vhat = np.fft.fftn(v, axes=axes, norm="forward")
        conv = np.real(np.fft.ifftn(_apply_multiplier(vhat, mult, modes, h.dim),
                                    axes=axes, norm="forward"))
        if h.bias_mode == "constant":
            b = bias
        else:
            b = _bias_field(bias, modes, h.dim, u.resolution)
        v = act(v @ w_mat.T + conv + b)
    return float(np.mean(v @ q_mat.T))


# ---------------------------------------------------------------------
# super architecture and zero-padding
# ---------------------------------------------------------------------


def super_arch(q: int, dim: int, d_in: int, d_out: int, depth: int,
               activation: str = "relu") -> FnoHyper:
    """Maximally connected architecture (d_c = kappa = q) of the given depth.

    Its parameter count is at most 5 * 2^dim * q^(dim+3) for depth <= q.
    """
    if not 1 <= depth <= q:
        raise ValueError("need 1 <= depth <= q")
    if q < max(d_in, d_out):
        raise ValueError("q must be >= the boundary channel counts")
    hyper = FnoHyper(dim, d_in, d_out, d_c=q, kappa=q, depth=depth,
                     activation=activation)
    cap = 5 * 2**dim * q ** (dim + 3)
    if param_count(hyper).q > cap:
        raise RuntimeError("super architecture exceeded its algebraic cap")
    return hyper


def zero_pad_embed(small: FnoParams, target: FnoHyper) -> FnoParams:
    """Embed a parameter vector into a dominating architecture by zero-padding.

    The padded operator reproduces the small one exactly: new channels and
    modes carry zero weights, and zero projection columns annihilate any
    activation offset living in padded channels.
    """
    s = small.hyper
    if target.depth != s.depth:
        raise IncompatibleDepth(f"depth {target.depth} != {s.depth}")
    if (target.dim != s.dim or target.activation != s.activation
            or target.bias_mode != s.bias_mode):
        raise TargetTooSmall("dim, activation and bias mode must match")
    if target.d_in != s.d_in or target.d_out != s.d_out:
        raise TargetTooSmall("boundary channel counts must match")
    if target.d_c < s.d_c or target.kappa < s.kappa:
        raise TargetTooSmall("target must dominate d_c and kappa")

    small_modes = canonical_modes(s.dim, s.kappa)
    target_slot = {k: 1 + 2 * t
                   for t, k in enumerate(canonical_modes(target.dim, target.kappa))}
    dcs, dct = s.d_c, target.d_c

    q_s, layers_s, p_s = small.blocks()
    q_t = np.zeros((target.d_out, dct))
    q_t[:, :dcs] = q_s
    p_t = np.zeros((dct, target.d_in))
    p_t[:dcs, :] = p_s
    layers_t = []
    for w_s, mult_s, bias_s in layers_s:
        w_t = np.zeros((dct, dct))
        w_t[:dcs, :dcs] = w_s
        mult_t = np.zeros((target.n_mode_slots, dct, dct))
        mult_t[0, :dcs, :dcs] = mult_s[0]
        for t, k in enumerate(small_modes):
            base = target_slot[k]
            mult_t[base, :dcs, :dcs] = mult_s[1 + 2 * t]
            mult_t[base + 1, :dcs, :dcs] = mult_s[2 + 2 * t]
        if s.bias_mode == "constant":
            bias_t = np.zeros(dct)
            bias_t[:dcs] = bias_s
        else:
            bias_t = np.zeros((target.n_mode_slots, dct))
            bias_t[0, :dcs] = bias_s[0]
            for t, k in enumerate(small_modes):
                base = target_slot[k]
                bias_t[base, :dcs] = bias_s[1 + 2 * t]
                bias_t[base + 1, :dcs] = bias_s[2 + 2 * t]
        layers_t.append((w_t, mult_t, bias_t))
    return FnoParams.pack(target, q_t, layers_t, p_t)


# ---------------------------------------------------------------------
# empirical parameter-to-operator Lipschitz estimate
# ---------------------------------------------------------------------


def empirical_lipschitz(hyper: FnoHyper, box: float, probes: int,
                        input_set: Sequence[GridFunction], seed: int) -> float:
    """Lower estimate of the Lipschitz constant of theta -> Phi(.; theta).

    Max over random canonical parameter pairs in [-box, box]^q and over the
    input family of |Phi(u; theta) - Phi(u; theta')| / ||theta - theta'||_inf.
    """
    if probes < 100:
        raise ValueError("need at least 100 probes")
    if not input_set:
        raise ValueError("empty input set")
    rng = stream(seed, STREAM_FNO_PROBE)
    best = 0.0
    for _ in range(probes):
        a = FnoParams.random(hyper, box, rng)
        b = FnoParams.random(hyper, box, rng)
        denom = float(np.max(np.abs(a.theta - b.theta)))
        if denom == 0:
            continue
        gap = max(abs(forward(a, u) - forward(b, u)) for u in input_set)
        best = max(best, gap / denom)
    return best


# ---------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------


def save_theta(params: FnoParams, path) -> None:
    with open(path, "wb") as fh:
        fh.write(params.theta.astype("<f8").tobytes())


def load_params(hyper: FnoHyper, path) -> FnoParams:
    with open(path, "rb") as fh:
        theta = np.frombuffer(fh.read(), dtype="<f8")
    return FnoParams(hyper, theta)


def load_hyper(path) -> FnoHyper:
    with open(path, "r", encoding="utf-8") as fh:
        return FnoHyper.from_json(json.load(fh))
