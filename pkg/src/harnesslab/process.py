"""Surface processes: the free harness and its wall-constrained variants.

One update reads only the previous field: every site becomes the
kernel-weighted average of its neighbors plus a fresh symmetric noise
draw, then the wall rule is applied.

    free    x = m + e          (may go negative)
    clip    x = max(m + e, 0)  (excluded by the wall)
    freeze  x = m + e if positive, else the site keeps its old height
    drift   x = m + e if positive, else the noiseless average m

Two finite geometries stand in for the infinite lattice: an exact cone
(the active box shrinks by the kernel range v per step, so values it
still holds are exactly those of the infinite lattice) and a torus
(periodic wrap, cheap for long runs, exact at the origin only while
2*v*n < L).

All processes coupled on one `NoiseField` see identical draws at equal
(time, site), which is what makes the pathwise dominations
W >= Y, W' >= W, W'' >= W testable as hard assertions.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field, replace
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import _fast, noise as noise_mod, streams
from .errors import NegativeStart, NoiseRowMismatch
from .kernel import Kernel

KINDS = ("free", "clip", "freeze", "drift")
KIND_CODES = {"free": 0, "clip": 1, "freeze": 2, "drift": 3}

#: domination pairs (upper, lower) that hold pathwise under coupling
DOMINATION_PAIRS = (("clip", "free"), ("freeze", "clip"), ("drift", "clip"))


@dataclass(frozen=True)
class Geometry:
    mode: str  # "cone" | "torus"
    dim: int
    range: int  # kernel range v
    n_max: int = 0  # cone horizon (max exact steps)
    size: int = 0  # torus side L

    def __post_init__(self):
        if self.mode not in ("cone", "torus"):
            raise ValueError(f"unknown geometry mode {self.mode!r}")
        if self.dim < 1 or self.range < 1:
            raise ValueError("need dim >= 1 and kernel range >= 1")
        if self.mode == "cone" and self.n_max < 0:
            raise ValueError("cone horizon must be >= 0")
        if self.mode == "torus" and self.size < 2 * self.range + 1:
            raise ValueError("torus side must be at least 2v + 1")

    @property
    def grid_shape(self) -> Tuple[int, ...]:
        if self.mode == "cone":
            side = 2 * self.range * self.n_max + 1
        else:
            side = self.size
        return (side,) * self.dim

    @property
    def n_sites(self) -> int:
        return int(np.prod(self.grid_shape))

    @property
    def spec(self) -> str:
        if self.mode == "cone":
            return f"cone({self.n_max})"
        return f"torus({self.size})"


def cone(dim: int, v: int, n_max: int) -> Geometry:
    return Geometry("cone", dim, v, n_max=n_max)


def torus(dim: int, v: int, size: int) -> Geometry:
    return Geometry("torus", dim, v, size=size)


@lru_cache(maxsize=None)
def grid_coords(geom: Geometry) -> np.ndarray:
    """Canonical Z^d coordinates of every grid site, shape (n_sites, d).

    Cone grids are centered boxes; torus indices map to the centered
    representative, so draws agree with the cone wherever both exist.
    """
    shape = geom.grid_shape
    axes = []
    for side in shape:
        if geom.mode == "cone":
            axes.append(np.arange(side, dtype=np.int64) - side // 2)
        else:
            half = side // 2
            axes.append((np.arange(side, dtype=np.int64) + half) % side - half)
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


@lru_cache(maxsize=None)
def grid_site_keys(geom: Geometry) -> np.ndarray:
    return streams.site_keys(grid_coords(geom))


@lru_cache(maxsize=None)
def origin_index(geom: Geometry) -> int:
    shape = geom.grid_shape
    if geom.mode == "cone":
        center = tuple(s // 2 for s in shape)
    else:
        center = (0,) * geom.dim
    return int(np.ravel_multi_index(center, shape))


@lru_cache(maxsize=None)
def active_indices(geom: Geometry, radius: int) -> np.ndarray:
    """Linear indices of the centered box of max-norm `radius` (cone),
    or of the whole grid (torus)."""
    shape = geom.grid_shape
    if geom.mode == "torus":
        return np.arange(geom.n_sites, dtype=np.int64)
    center = shape[0] // 2
    if radius < 0 or center - radius < 0:
        raise ValueError("active radius outside the cone grid")
    ax = np.arange(center - radius, center + radius + 1, dtype=np.int64)
    mesh = np.meshgrid(*([ax] * geom.dim), indexing="ij")
    return np.ravel_multi_index([m.ravel() for m in mesh], shape).astype(np.int64)


@lru_cache(maxsize=None)
def linear_deltas(geom: Geometry, kern: Kernel) -> np.ndarray:
    """Row-major linear index shifts of the kernel offsets (cone grids)."""
    shape = geom.grid_shape
    strides = np.ones(geom.dim, dtype=np.int64)
    for axis in range(geom.dim - 2, -1, -1):
        strides[axis] = strides[axis + 1] * shape[axis + 1]
    return (kern.offsets @ strides).astype(np.int64)


@lru_cache(maxsize=None)
def torus_neighbor_table(geom: Geometry, kern: Kernel) -> np.ndarray:
    """(n_sites, n_offsets) table of wrapped neighbor indices."""
    shape = geom.grid_shape
    idx = np.arange(geom.n_sites, dtype=np.int64).reshape(shape)
    cols = []
    axes = tuple(range(geom.dim))
    for off in kern.offsets:
        cols.append(np.roll(idx, shift=tuple(-int(c) for c in off), axis=axes).ravel())
    return np.stack(cols, axis=1)


@dataclass(frozen=True)
class NoiseRow:
    """Noise draws for the sites updated at one time step."""

    time: int
    values: np.ndarray  # shaped like the updated region


class NoiseField:
    """Deterministic disorder: draw(time, site) depends only on
    (seed, replica, time, site), identically for every process coupled
    on this field."""

    def __init__(self, model: noise_mod.NoiseModel, seed: int, replica: int = 0,
                 shift: Optional[Sequence[int]] = None):
        self.model = model
        self.seed = int(seed)
        self.replica = int(replica)
        self.shift = None if shift is None else np.asarray(shift, dtype=np.int64)
        self._skey = streams.stream_key(self.seed, self.replica)

    def translate(self, vector: Sequence[int]) -> "NoiseField":
        """Field with draws taken at site + vector (lattice shift)."""
        base = np.zeros(len(vector), dtype=np.int64) if self.shift is None else self.shift
        return NoiseField(self.model, self.seed, self.replica,
                          shift=base + np.asarray(vector, dtype=np.int64))

    def draw(self, time: int, coords: np.ndarray) -> np.ndarray:
        """Values at canonical coordinates (m, d) for one time step."""
        coords = np.atleast_2d(np.asarray(coords, dtype=np.int64))
        if self.shift is not None:
            coords = coords + self.shift
        skeys = streams.site_keys(coords)
        return self._from_site_keys(time, skeys)

    def _from_site_keys(self, time: int, skeys: np.ndarray) -> np.ndarray:
        tkey = streams.time_key(self._skey, time)
        dk = streams.draw_keys(tkey, skeys)
        if self.model.family == "gaussian":
            return _fast.gaussian_from_keys(dk, self.model.params[0])
        u = streams.unit_from_keys(dk)
        out = noise_mod.magnitude_from_unit(self.model, u)
        out *= streams.signs_from_keys(dk)
        return out

    def row(self, geom: Geometry, time: int, radius: Optional[int] = None) -> NoiseRow:
        """Draws for the update region: the whole torus, or the cone box
        of the given max-norm radius."""
        if geom.mode == "torus":
            act = active_indices(geom, 0)
            shape = geom.grid_shape
        else:
            if radius is None:
                raise NoiseRowMismatch("cone rows need the target radius")
            act = active_indices(geom, radius)
            shape = (2 * radius + 1,) * geom.dim
        coords = grid_coords(geom)[act]
        return NoiseRow(time=time, values=self.draw(time, coords).reshape(shape))


@dataclass(frozen=True)
class SurfaceState:
    """Height field at one time; cone states track how many exact steps
    they still support (`steps_left`)."""

    geometry: Geometry
    kind: str
    time: int
    heights: np.ndarray  # full grid, flat; stale outside the active box
    start_height: float = 0.0
    steps_left: Optional[int] = None

    @property
    def active_radius(self) -> Optional[int]:
        if self.geometry.mode == "torus":
            return None
        return self.geometry.range * self.steps_left

    def active(self) -> np.ndarray:
        rad = 0 if self.active_radius is None else self.active_radius
        return active_indices(self.geometry, rad)

    def active_heights(self) -> np.ndarray:
        return self.heights[self.active()]

    def origin(self) -> float:
        return float(self.heights[origin_index(self.geometry)])


def init_flat(geom: Geometry, kind: str, r: float = 0.0, start_time: int = 0) -> SurfaceState:
    """All heights equal r at `start_time` (r = 0 is the flat start)."""
    if kind not in KINDS:
        raise ValueError(f"unknown process kind {kind!r}")
    if r < 0:
        raise NegativeStart(f"start height must be >= 0, got {r}")
    heights = np.full(geom.n_sites, float(r))
    steps_left = geom.n_max if geom.mode == "cone" else None
    return SurfaceState(geometry=geom, kind=kind, time=start_time,
                        heights=heights, start_height=float(r), steps_left=steps_left)


def step(state: SurfaceState, noise_row: NoiseRow, kern: Kernel) -> SurfaceState:
    """One synchronous update of the whole (remaining) surface.

    The noise row must be for time `state.time + 1` and shaped to the
    updated region; cone states shrink their active box by v.
    """
    geom = state.geometry
    if noise_row.time != state.time + 1:
        raise NoiseRowMismatch(
            f"noise row is for time {noise_row.time}, surface expects {state.time + 1}")
    if geom.mode == "cone":
        if state.steps_left is None or state.steps_left < 1:
            raise NoiseRowMismatch("cone horizon exhausted; nothing left to update")
        new_rad = geom.range * (state.steps_left - 1)
        act = active_indices(geom, new_rad)
        box_shape = (2 * new_rad + 1,) * geom.dim
        if noise_row.values.shape != box_shape:
            raise NoiseRowMismatch(
                f"noise row shape {noise_row.values.shape}, update box needs {box_shape}")
        full = state.heights.reshape(geom.grid_shape)
        m = None
        center = geom.grid_shape[0] // 2
        lo = center - new_rad
        hi = center + new_rad + 1
        for off, w in kern.entries:
            sl = tuple(slice(lo + c, hi + c) for c in off)
            contrib = w * full[sl]
            m = contrib if m is None else m + contrib
        prev_here = full[tuple(slice(lo, hi) for _ in range(geom.dim))]
        new_heights = np.full(geom.n_sites, np.nan)
        new_box = _apply_kind(state.kind, m, noise_row.values, prev_here)
        new_heights[act] = new_box.ravel()
        return replace(state, time=state.time + 1, heights=new_heights,
                       steps_left=state.steps_left - 1)
    # torus
    if noise_row.values.shape != geom.grid_shape:
        raise NoiseRowMismatch(
            f"noise row shape {noise_row.values.shape}, torus needs {geom.grid_shape}")
    h = state.heights.reshape(geom.grid_shape)
    axes = tuple(range(geom.dim))
    m = None
    for off, w in kern.entries:
        contrib = w * np.roll(h, shift=tuple(-int(c) for c in off), axis=axes)
        m = contrib if m is None else m + contrib
    new_box = _apply_kind(state.kind, m, noise_row.values, h)
    return replace(state, time=state.time + 1, heights=new_box.ravel())


def _apply_kind(kind: str, m: np.ndarray, e: np.ndarray, prev: np.ndarray) -> np.ndarray:
    x = m + e
    if kind == "free":
        return x
    if kind == "clip":
        return np.where(x > 0.0, x, 0.0)
    if kind == "freeze":
        return np.where(x > 0.0, x, prev)
    return np.where(x > 0.0, x, m)  # drift


def evolve_coupled(
    geom: Geometry,
    kern: Kernel,
    field: NoiseField,
    kinds: Sequence[str],
    n: int,
    observables: Sequence[str] = ("origin",),
    start_height: float = 0.0,
    check_dominations: bool = True,
) -> Dict:
    """Evolve several kinds in lockstep on one noise field.

    Returns per-kind origin trajectories (times 0..n), optional active
    field summaries per step, and counts of pathwise-order violations
    for the coupled pairs (these should always come back zero).
    """
    kinds = list(kinds)
    states = {k: init_flat(geom, k, start_height) for k in kinds}
    traj = {k: [states[k].origin()] for k in kinds}
    summaries = {
        (k, obs): [_summary(states[k], obs)]
        for k in kinds for obs in observables if obs != "origin"
    }
    pairs = [(hi, lo) for hi, lo in DOMINATION_PAIRS if hi in kinds and lo in kinds]
    violations = {p: 0 for p in pairs}
    for j in range(1, n + 1):
        if geom.mode == "cone":
            rad = geom.range * (states[kinds[0]].steps_left - 1)
            row = field.row(geom, j, radius=rad)
        else:
            row = field.row(geom, j)
        for k in kinds:
            states[k] = step(states[k], row, kern)
            traj[k].append(states[k].origin())
            for obs in observables:
                if obs != "origin":
                    summaries[(k, obs)].append(_summary(states[k], obs))
        for hi, lo in pairs:
            a = states[hi].active_heights()
            b = states[lo].active_heights()
            violations[(hi, lo)] += int(np.count_nonzero(a < b))
    out = {
        "times": np.arange(0, n + 1),
        "origin": {k: np.array(traj[k]) for k in kinds},
        "violations": violations,
    }
    for (k, obs), vals in summaries.items():
        out.setdefault(obs, {})[k] = np.array(vals)
    return out


def _summary(state: SurfaceState, obs: str) -> float:
    h = state.active_heights()
    if obs == "mean":
        return float(h.mean())
    if obs == "max":
        return float(h.max())
    if obs == "min":
        return float(h.min())
    raise ValueError(f"unknown observable {obs!r}")


def time_shift_coupling(
    geom: Geometry, kern: Kernel, seed: int, k_max: int,
    model: noise_mod.NoiseModel, kind: str = "clip", replica: int = 0,
) -> np.ndarray:
    """Origin heights h_k at time 0 of the wall process started flat at
    time -k, all runs on the same disorder (negative-time draws).

    Attractiveness makes h_k nondecreasing in k, pathwise; h_k is
    distributed as the wall height after k steps from a flat start.
    """
    if geom.mode != "cone" or geom.n_max < k_max:
        raise ValueError("need a cone geometry sized for k_max")
    field = NoiseField(model, seed, replica)
    out = np.empty(k_max + 1)
    for k in range(k_max + 1):
        sub = cone(geom.dim, geom.range, k)
        state = init_flat(sub, kind, 0.0, start_time=-k)
        for j in range(k):
            t = -k + j + 1
            rad = sub.range * (state.steps_left - 1)
            state = step(state, field.row(sub, t, radius=rad), kern)
        out[k] = state.origin()
    return out
