"""Exact kernel: pmfs, oblivious partitions, flattening and LP distances.

Indices exposed to callers are 1-based, matching the domain [n] = {1, ..., n}.
Arrays stored internally are 0-based numpy vectors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from . import kernels

TOL_SUM = 1e-12
TOL_NORMALIZE = 1e-9
TOL_ROUNDING = 1e-13
TOL_RATIO = 1e-12
C_ELL = 4.0

_LP_OPTIONS = {
    "primal_feasibility_tolerance": 1e-10,
    "dual_feasibility_tolerance": 1e-10,
}


class DistributionError(ValueError):
    """Raised when a weight vector cannot be a probability distribution."""


class Pmf:
    """Probability mass function over [n] with cached prefix sums.

    Inputs whose total deviates from 1 by at most 1e-9 are renormalized;
    larger deviations are rejected as caller bugs.
    """

    __slots__ = ("_w", "_cdf")

    def __init__(self, weights: Iterable[float] | np.ndarray):
        w = np.array(weights, dtype=np.float64).ravel()
        if w.size == 0:
            raise DistributionError("a pmf needs at least one element")
        if not np.all(np.isfinite(w)):
            raise DistributionError("weights must be finite")
        if np.any(w < 0):
            # rounding noise from subtraction is clipped, real negatives are not
            if np.min(w) < -TOL_SUM:
                raise DistributionError(f"negative weight {np.min(w):.3e}")
            w = np.maximum(w, 0.0)
        total = float(w.sum())
        if abs(total - 1.0) > TOL_NORMALIZE:
            raise DistributionError(f"weights sum to {total!r}, expected 1")
        # sums off by summation-order rounding are left alone, so reordering
        # weights (e.g. mirroring) never changes them
        if abs(total - 1.0) > TOL_ROUNDING:
            w = w / total
        w.setflags(write=False)
        cdf = np.concatenate(([0.0], np.cumsum(w)))
        cdf[-1] = min(cdf[-1], 1.0)
        cdf = np.maximum.accumulate(cdf)
        cdf.setflags(write=False)
        self._w = w
        self._cdf = cdf

    @classmethod
    def uniform(cls, n: int) -> "Pmf":
        if n < 1:
            raise DistributionError("n must be positive")
        return cls(np.full(n, 1.0 / n))

    @classmethod
    def point_mass(cls, n: int, i: int) -> "Pmf":
        w = np.zeros(n)
        w[i - 1] = 1.0
        return cls(w)

    @property
    def n(self) -> int:
        return int(self._w.size)

    @property
    def weights(self) -> np.ndarray:
        return self._w

    @property
    def cdf(self) -> np.ndarray:
        """Prefix sums of length n+1; cdf[j] is the mass of {1..j}."""
        return self._cdf

    def __len__(self) -> int:
        return self.n

    def __call__(self, i: int) -> float:
        return float(self._w[i - 1])

    def mass(self, a: int, b: int) -> float:
        """Mass of the interval [a, b] (1-based, inclusive)."""
        if b < a:
            return 0.0
        return float(self._cdf[b] - self._cdf[a - 1])

    def mass_of(self, indices: Iterable[int]) -> float:
        idx = np.asarray(list(indices), dtype=np.int64)
        return float(self._w[idx - 1].sum())

    def conditional(self, indices: Sequence[int]) -> "Pmf":
        """Conditional distribution on the given indices, in their order."""
        idx = np.asarray(indices, dtype=np.int64)
        sub = self._w[idx - 1]
        total = float(sub.sum())
        if total <= 0:
            raise DistributionError("conditioning on a zero-mass set")
        return Pmf(sub / total)

    def is_monotone(self, tol: float = TOL_SUM) -> bool:
        return bool(np.all(np.diff(self._w) <= tol))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Pmf):
            return NotImplemented
        return self.n == other.n and bool(np.array_equal(self._w, other._w))

    def __hash__(self) -> int:
        return hash(self._w.tobytes())

    def __repr__(self) -> str:
        if self.n <= 6:
            return f"Pmf({np.round(self._w, 6).tolist()})"
        return f"Pmf(n={self.n})"

    def to_json(self) -> dict:
        return {"n": self.n, "weights": self._w.tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "Pmf":
        p = cls(obj["weights"])
        if p.n != int(obj.get("n", p.n)):
            raise DistributionError("field n disagrees with the weights length")
        return p


def _weights(p) -> np.ndarray:
    if isinstance(p, Pmf):
        return p.weights
    return np.asarray(p, dtype=np.float64)


class IntervalPartition:
    """Consecutive intervals covering [n], given by their right endpoints.

    ``bounds`` has length ell+1 with bounds[0] = 0 and bounds[-1] = n; block k
    (1-based) is the interval (bounds[k-1], bounds[k]].
    """

    def __init__(self, bounds: Sequence[int]):
        b = np.asarray(bounds, dtype=np.int64)
        if b.ndim != 1 or b.size < 2 or b[0] != 0:
            raise ValueError("bounds must start at 0 and hold at least one block")
        if np.any(np.diff(b) <= 0):
            raise ValueError("intervals must be nonempty and consecutive")
        b.setflags(write=False)
        self._bounds = b

    @property
    def bounds(self) -> np.ndarray:
        return self._bounds

    @property
    def n(self) -> int:
        return int(self._bounds[-1])

    @property
    def ell(self) -> int:
        return int(self._bounds.size - 1)

    def __len__(self) -> int:
        return self.ell

    @property
    def sizes(self) -> np.ndarray:
        return np.diff(self._bounds)

    def interval(self, k: int) -> tuple[int, int]:
        """Endpoints (a_k, b_k) of block k, both inclusive and 1-based."""
        return int(self._bounds[k - 1]) + 1, int(self._bounds[k])

    def block_of(self, i):
        """Block index (1-based) holding position i; vectorized over arrays."""
        return np.searchsorted(self._bounds, i, side="left")

    def size_ratios(self) -> np.ndarray:
        """s_{k+1}/s_k for k = 1..ell-1."""
        s = self.sizes.astype(np.float64)
        return s[1:] / s[:-1]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, IntervalPartition):
            return NotImplemented
        return bool(np.array_equal(self._bounds, other._bounds))

    def __hash__(self) -> int:
        return hash(self._bounds.tobytes())

    def __repr__(self) -> str:
        return f"{type(self).__name__}(n={self.n}, ell={self.ell})"


class ObliviousPartition(IntervalPartition):
    """Geometric decomposition of [n] with block sizes floor((1+alpha)^k)."""

    def __init__(self, n: int, alpha: float):
        if n < 1:
            raise ValueError("n must be positive")
        if not (0.0 < alpha <= 1.0):
            raise ValueError(f"alpha must lie in (0, 1], got {alpha!r}")
        self.alpha = float(alpha)
        super().__init__(_geometric_bounds(int(n), float(alpha)))

    def __repr__(self) -> str:
        return f"ObliviousPartition(n={self.n}, alpha={self.alpha}, ell={self.ell})"


@lru_cache(maxsize=256)
def _geometric_bounds(n: int, alpha: float) -> tuple[int, ...]:
    bounds = [0]
    k = 1
    while bounds[-1] < n:
        # the tiny bump guards against pow() landing just under an integer
        size = math.floor((1.0 + alpha) ** k * (1.0 + 1e-12))
        bounds.append(min(bounds[-1] + size, n))
        k += 1
    return tuple(bounds)


@lru_cache(maxsize=256)
def oblivious_partition(n: int, alpha: float) -> ObliviousPartition:
    return ObliviousPartition(n, alpha)


def ell_bound(n: int, alpha: float) -> float:
    return C_ELL * math.log(alpha * n + 2) / alpha


@dataclass(frozen=True, eq=False)
class Histogram:
    """Piecewise-constant distribution: a partition plus one weight per block."""

    partition: IntervalPartition
    block_weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.block_weights, dtype=np.float64).ravel()
        if w.size != self.partition.ell:
            raise ValueError("one weight per block is required")
        if np.any(w < -TOL_SUM):
            raise DistributionError("negative block weight")
        w = np.maximum(w, 0.0)
        total = float(w.sum())
        if abs(total - 1.0) > TOL_NORMALIZE:
            raise DistributionError(f"block weights sum to {total!r}")
        if abs(total - 1.0) > TOL_ROUNDING:
            w = w / total
        w.setflags(write=False)
        object.__setattr__(self, "block_weights", w)

    @property
    def n(self) -> int:
        return self.partition.n

    @property
    def ell(self) -> int:
        return self.partition.ell

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Histogram):
            return NotImplemented
        return self.partition == other.partition and bool(
            np.array_equal(self.block_weights, other.block_weights))

    def __hash__(self) -> int:
        return hash((self.partition, self.block_weights.tobytes()))

    def densities(self) -> np.ndarray:
        """Per-element value inside each block."""
        return self.block_weights / self.partition.sizes

    def to_pmf(self) -> Pmf:
        return Pmf(np.repeat(self.densities(), self.partition.sizes))

    @classmethod
    def from_pmf(cls, d: Pmf, part: IntervalPartition) -> "Histogram":
        return cls(part, _block_sums(d, part))

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "bounds": self.partition.bounds.tolist(),
            "blockWeights": self.block_weights.tolist(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Histogram":
        return cls(IntervalPartition(obj["bounds"]), np.asarray(obj["blockWeights"]))


@dataclass(frozen=True)
class WitnessReport:
    tau: float
    indices: tuple[int, ...]
    mass: float

    def __len__(self) -> int:
        return len(self.indices)


def _check_same_n(d: Pmf, part: IntervalPartition) -> None:
    if d.n != part.n:
        raise ValueError(f"pmf has n={d.n} but partition covers n={part.n}")


def _block_sums(d: Pmf, part: IntervalPartition) -> np.ndarray:
    _check_same_n(d, part)
    c = d.cdf[part.bounds]
    return np.maximum(np.diff(c), 0.0)


def tv_distance(p, q) -> float:
    """Half the l1 distance between two pmfs on the same domain."""
    a, b = _weights(p), _weights(q)
    if a.shape != b.shape:
        raise ValueError(f"domain sizes differ: {a.size} vs {b.size}")
    return float(min(1.0, 0.5 * np.abs(a - b).sum()))


def flatten(d: Pmf, part: IntervalPartition) -> Pmf:
    sums = _block_sums(d, part)
    return Pmf(np.repeat(sums / part.sizes, part.sizes))


def reduce(d: Pmf, part: IntervalPartition) -> Pmf:
    """Block-mass distribution over [ell]."""
    return Pmf(_block_sums(d, part))


def expand(q: Pmf, part: IntervalPartition) -> Pmf:
    """Spread each block's mass uniformly over its interval."""
    if q.n != part.ell:
        raise ValueError(f"expected {part.ell} block weights, got {q.n}")
    return Pmf(np.repeat(q.weights / part.sizes, part.sizes))


def mirror(d: Pmf) -> Pmf:
    """Index reversal i -> n+1-i."""
    return Pmf(d.weights[::-1].copy())


def _solve_l1_lp(target: np.ndarray, chain: sparse.spmatrix | None) -> tuple[float, np.ndarray]:
    """min (1/2)*sum|target - x| over x >= 0, sum x = 1, chain @ x <= 0.

    Variables are stacked as [x, t] with t bounding |target - x|.
    """
    m = target.size
    eye = sparse.identity(m, format="csr")
    blocks = [
        sparse.hstack([-eye, -eye]),  # target - x <= t
        sparse.hstack([eye, -eye]),  # x - target <= t
    ]
    rhs = [-target, target]
    if chain is not None and chain.shape[0] > 0:
        blocks.append(sparse.hstack([chain, sparse.csr_matrix((chain.shape[0], m))]))
        rhs.append(np.zeros(chain.shape[0]))
    a_ub = sparse.vstack(blocks, format="csr")
    b_ub = np.concatenate(rhs)
    a_eq = sparse.csr_matrix(np.concatenate([np.ones(m), np.zeros(m)])[None, :])
    cost = np.concatenate([np.zeros(m), np.full(m, 0.5)])
    res = linprog(
        cost,
        A_ub=a_ub,
        b_ub=b_ub,
        A_eq=a_eq,
        b_eq=[1.0],
        bounds=(0, None),
        method="highs-ds",
        options=_LP_OPTIONS,
    )
    if res.status != 0:
        raise RuntimeError(f"LP solver failed: {res.message}")
    return float(max(0.0, res.fun)), np.maximum(res.x[:m], 0.0)


def _ratio_chain(ratios: np.ndarray) -> sparse.csr_matrix:
    """Rows encode x[k+1] - ratios[k] * x[k] <= 0."""
    m = ratios.size + 1
    rows = np.arange(m - 1)
    data = np.concatenate([np.ones(m - 1), -np.asarray(ratios, dtype=np.float64)])
    r = np.concatenate([rows, rows])
    c = np.concatenate([rows + 1, rows])
    return sparse.csr_matrix((data, (r, c)), shape=(m - 1, m))


def distance_to_monotone_exact(d: Pmf) -> float:
    """TV distance from d to the closest non-increasing pmf (n-variable LP)."""
    if d.n == 1 or d.is_monotone(tol=0.0):
        return 0.0
    value, _ = _solve_l1_lp(d.weights, _ratio_chain(np.ones(d.n - 1)))
    return min(1.0, value)


def distance_to_monotone_flat(h: Histogram) -> float:
    """Same quantity for a histogram, solved over flat monotone comparators.

    A comparator with block weights q is monotone iff q[k+1]/s[k+1] <= q[k]/s[k].
    """
    if h.ell == 1:
        return 0.0
    dens = h.densities()
    if np.all(np.diff(dens) <= 0):
        return 0.0
    value, _ = _solve_l1_lp(h.block_weights, _ratio_chain(h.partition.size_ratios()))
    return min(1.0, value)


def project_monotone(target, part: IntervalPartition) -> Histogram:
    """Closest flat monotone distribution, in l1 over blocks, to any target.

    ``target`` holds one non-negative number per block and need not sum to 1.
    """
    t = np.asarray(target, dtype=np.float64)
    if t.size != part.ell:
        raise ValueError("one target value per block is required")
    if part.ell == 1:
        return Histogram(part, np.ones(1))
    _, q = _solve_l1_lp(t, _ratio_chain(part.size_ratios()))
    return Histogram(part, q / q.sum())


def _ratio_bounds(ell: int, alpha: float, ratios) -> np.ndarray:
    if ratios is None:
        return np.full(max(ell - 1, 0), 1.0 + alpha)
    r = np.asarray(ratios, dtype=np.float64)
    if r.size != max(ell - 1, 0):
        raise ValueError("need one ratio bound per consecutive pair")
    return r


def satisfies_expprop(q: Pmf, alpha: float, ratios=None) -> bool:
    """Q(k+1) <= (1+alpha) Q(k) for all k.

    ``ratios`` replaces the constant 1+alpha by per-pair bounds; passing the
    size ratios of a floored partition gives the exact image of monotone pmfs.
    """
    w = q.weights
    r = _ratio_bounds(q.n, alpha, ratios)
    return bool(np.all(w[1:] <= r * w[:-1] + TOL_RATIO))


def distance_to_expprop_exact(q: Pmf, alpha: float, ratios=None) -> float:
    if q.n == 1 or satisfies_expprop(q, alpha, ratios):
        return 0.0
    value, _ = _solve_l1_lp(q.weights, _ratio_chain(_ratio_bounds(q.n, alpha, ratios)))
    return min(1.0, value)


def tau_witnesses(q: Pmf, alpha: float, tau: float, ratios=None) -> WitnessReport:
    """Positions i >= 2 with Q(i) > (1+alpha+tau) Q(i-1)."""
    if tau < 0:
        raise ValueError("tau must be non-negative")
    w = q.weights
    r = _ratio_bounds(q.n, alpha, ratios)
    hit = w[1:] > (r + tau) * w[:-1] + TOL_RATIO
    idx = np.nonzero(hit)[0] + 2
    return WitnessReport(float(tau), tuple(int(i) for i in idx), float(w[idx - 1].sum()))


def fixup(q: Pmf, alpha: float, ratios=None) -> Pmf:
    """Repair every witness, leftmost first, by raising its predecessors.

    The mass added to predecessors is taken back from the rightmost points.
    """
    w = np.array(q.weights, dtype=np.float64)
    r = np.ascontiguousarray(_ratio_bounds(q.n, alpha, ratios))
    return Pmf(kernels.fixup_weights(w, r))
