"""Finite-range averaging kernels on Z^d and their convolution powers.

A kernel is a zero-mean stochastic weight family p(j) supported on a
box of max-norm radius v whose support offsets generate the full
integer lattice.  Powers p_r are built by dense shift-add convolution
over the radius r*v box; the collision sum

    s(m) = sum_{r=0}^{m-1} sum_j p_r(j)^2

is the expected number of meetings of two independent p-walks, and
fixes both the free-surface variance and the natural height scale.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Mapping, Sequence, Tuple, Union

import numpy as np

from .errors import DegenerateSpan, NegativeWeight, NonZeroMean, NotStochastic

Offset = Tuple[int, ...]

_SUM_TOL = 1e-12
_MEAN_TOL = 1e-12
_PRUNE = 1e-300


@dataclass(frozen=True)
class Kernel:
    """Validated averaging kernel; construct via `kernel_validate`."""

    dim: int
    entries: Tuple[Tuple[Offset, float], ...]
    range: int

    @property
    def offsets(self) -> np.ndarray:
        return np.array([o for o, _ in self.entries], dtype=np.int64)

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for _, w in self.entries], dtype=np.float64)

    @property
    def weight_map(self) -> Dict[Offset, float]:
        return dict(self.entries)

    @property
    def spec(self) -> str:
        pairs = ", ".join(f"{list(o)}:{w:g}" for o, w in self.entries)
        return f"d={self.dim} [{pairs}]"


@dataclass(frozen=True)
class StepDistribution:
    """Law of the r-step kernel walk from the origin."""

    step: int
    probs: Dict[Offset, float]

    def as_dense(self, dim: int, radius: int) -> np.ndarray:
        arr = np.zeros((2 * radius + 1,) * dim)
        for off, p in self.probs.items():
            arr[tuple(c + radius for c in off)] = p
        return arr


def _as_offset(key: Union[int, Sequence[int]], dim: int) -> Offset:
    if isinstance(key, (int, np.integer)):
        key = (int(key),)
    off = tuple(int(c) for c in key)
    if len(off) != dim:
        raise DegenerateSpan(f"offset {off} does not have dimension {dim}")
    return off


def _spans_lattice(offsets: np.ndarray, dim: int) -> bool:
    # Lattice generated by the support equals Z^d iff the column-style
    # Hermite normal form of the offset matrix is d x d with unit diagonal.
    from sympy import Matrix
    from sympy.matrices.normalforms import hermite_normal_form

    mat = Matrix(offsets.T.tolist())
    hnf = hermite_normal_form(mat)
    if hnf.shape != (dim, dim):
        return False
    return all(abs(hnf[i, i]) == 1 for i in range(dim))


def kernel_validate(dim: int, raw_weights: Mapping) -> Kernel:
    """Check and freeze a kernel given as offset -> weight.

    Raises NegativeWeight, NotStochastic, NonZeroMean or DegenerateSpan;
    the range v is the largest coordinate magnitude in the support.
    """
    if dim < 1:
        raise DegenerateSpan("dimension must be >= 1")
    if not raw_weights:
        raise NotStochastic("empty weight map")
    entries = {}
    for key, w in raw_weights.items():
        off = _as_offset(key, dim)
        w = float(w)
        if w < 0:
            raise NegativeWeight(f"weight of offset {off} is {w}")
        if w > 0:
            entries[off] = entries.get(off, 0.0) + w
    if not entries:
        raise NotStochastic("all weights are zero")
    total = sum(entries.values())
    if abs(total - 1.0) > _SUM_TOL:
        raise NotStochastic(f"weights sum to {total!r}")
    offsets = np.array(sorted(entries), dtype=np.int64)
    weights = np.array([entries[tuple(o)] for o in offsets])
    mean = weights @ offsets
    if np.any(np.abs(mean) > _MEAN_TOL):
        raise NonZeroMean(f"kernel mean is {mean.tolist()}")
    if not _spans_lattice(offsets, dim):
        raise DegenerateSpan("support does not generate the full lattice")
    v = int(np.abs(offsets).max())
    frozen = tuple((tuple(int(c) for c in o), float(w)) for o, w in zip(offsets, weights))
    return Kernel(dim=dim, entries=frozen, range=v)


def nearest_neighbor(dim: int) -> Kernel:
    """Symmetric nearest-neighbor kernel: weight 1/(2d) on each +-e_k."""
    w = {}
    for axis in range(dim):
        for sign in (-1, 1):
            off = [0] * dim
            off[axis] = sign
            w[tuple(off)] = 1.0 / (2 * dim)
    return kernel_validate(dim, w)


def _convolve_once(cur: np.ndarray, kernel: Kernel) -> np.ndarray:
    # p_{m+1}(i) = sum_off w(off) p_m(i - off), grown by v per side.
    v = kernel.range
    out = np.zeros(tuple(n + 2 * v for n in cur.shape))
    for off, w in kernel.entries:
        sl = tuple(slice(v + c, v + c + n) for c, n in zip(off, cur.shape))
        out[sl] += w * cur
    return out


def _power_array(kernel: Kernel, r: int) -> np.ndarray:
    cur = np.ones((1,) * kernel.dim)
    for _ in range(r):
        cur = _convolve_once(cur, kernel)
    return cur


def kernel_power(kernel: Kernel, r: int) -> StepDistribution:
    """Exact r-fold self-convolution; r = 0 is the point mass at 0."""
    if r < 0:
        raise ValueError("r must be >= 0")
    arr = _power_array(kernel, r)
    radius = r * kernel.range
    probs: Dict[Offset, float] = {}
    for idx in np.argwhere(arr > _PRUNE):
        off = tuple(int(c) - radius for c in idx)
        probs[off] = float(arr[tuple(idx)])
    return StepDistribution(step=r, probs=probs)


def collision_sum(kernel: Kernel, n: int) -> np.ndarray:
    """s(1..n) as an array: element m-1 holds s(m).

    Strictly positive and nondecreasing; s(m+1) - s(m) = sum_j p_m(j)^2.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    out = np.empty(n)
    cur = np.ones((1,) * kernel.dim)
    acc = 0.0
    for m in range(n):
        acc += float((cur * cur).sum())
        out[m] = acc
        if m < n - 1:
            cur = _convolve_once(cur, kernel)
    return out


def sup_step_prob(kernel: Kernel, k: int) -> float:
    """max_j p_k(j); decays like k^(-d/2) for honest kernels."""
    if k < 0:
        raise ValueError("k must be >= 0")
    return float(_power_array(kernel, k).max())


def parse_kernel(dim: int, spec) -> Kernel:
    """Kernel from a config value: 'nn' or a list of (offset, weight) pairs."""
    if isinstance(spec, str):
        name = spec.strip().lower()
        if name in ("nn", "nearest_neighbor", "nearest-neighbor"):
            return nearest_neighbor(dim)
        raise NotStochastic(f"unknown kernel name {spec!r}")
    weights = {}
    for off, w in spec:
        weights[_as_offset(off, dim)] = float(w)
    return kernel_validate(dim, weights)
