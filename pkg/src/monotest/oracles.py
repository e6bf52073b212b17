"""Simulated oracle access to a hidden pmf, with per-kind query metering."""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from enum import Enum
from typing import Iterable

import numpy as np

from .distcore import Pmf


class Kind(str, Enum):
    SAMP = "samp"
    COND = "cond"
    INTCOND = "intcond"
    PAIRCOND = "paircond"
    EVAL = "eval"
    CEVAL = "ceval"


# Conditioning on the whole domain is plain sampling, so every conditional
# model also carries SAMP.
MODELS: dict[str, frozenset[Kind]] = {
    "samp": frozenset({Kind.SAMP}),
    "cond": frozenset({Kind.SAMP, Kind.COND}),
    "intcond": frozenset({Kind.SAMP, Kind.INTCOND}),
    "paircond": frozenset({Kind.SAMP, Kind.PAIRCOND}),
    "eval": frozenset({Kind.EVAL}),
    "dual": frozenset({Kind.SAMP, Kind.EVAL}),
    "cumulative": frozenset({Kind.SAMP, Kind.CEVAL}),
    "all": frozenset(Kind),
}


class OracleError(RuntimeError):
    pass


class PolicyViolation(OracleError):
    """A query kind outside the session's model was requested."""


class ZeroMassError(OracleError):
    """Conditioning on a set of zero probability: the oracle outputs failure."""


@dataclass
class QueryLog:
    samp: int = 0
    cond: int = 0
    intcond: int = 0
    paircond: int = 0
    eval: int = 0
    ceval: int = 0

    @property
    def total(self) -> int:
        return sum(getattr(self, f.name) for f in fields(self))

    def add(self, kind: Kind, count: int = 1) -> None:
        if count < 0:
            raise ValueError("query counts never decrease")
        setattr(self, kind.value, getattr(self, kind.value) + int(count))

    def snapshot(self) -> "QueryLog":
        return QueryLog(**self.as_dict())

    def as_dict(self) -> dict[str, int]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def used_kinds(self) -> set[Kind]:
        return {Kind(k) for k, v in self.as_dict().items() if v > 0}

    def __sub__(self, other: "QueryLog") -> "QueryLog":
        a, b = self.as_dict(), other.as_dict()
        return QueryLog(**{k: a[k] - b[k] for k in a})


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


@dataclass
class OracleSession:
    """Hidden pmf plus seeded randomness; the only channel a tester may use.

    Single-draw methods return a Python int; passing ``size`` returns an array
    of that many independent answers and charges ``size`` queries.
    """

    hidden: Pmf
    rng: np.random.Generator
    policy: frozenset = MODELS["all"]
    log: QueryLog = field(default_factory=QueryLog)
    record: bool = False
    transcript: list = field(default_factory=list)

    @classmethod
    def create(cls, hidden: Pmf, seed=None, model: str = "all", record: bool = False):
        if model not in MODELS:
            raise ValueError(f"unknown model {model!r}; choose from {sorted(MODELS)}")
        return cls(hidden, make_rng(seed), MODELS[model], QueryLog(), record, [])

    @property
    def n(self) -> int:
        return self.hidden.n

    def allows(self, kind: Kind) -> bool:
        return kind in self.policy

    def _charge(self, kind: Kind, count: int, *args) -> None:
        if kind not in self.policy:
            raise PolicyViolation(f"{kind.value} queries are not allowed in this model")
        self.log.add(kind, count)
        if self.record:
            self.transcript.append((kind.value, count, *args))

    def _check_index(self, i: int) -> None:
        if not (1 <= i <= self.n):
            raise IndexError(f"index {i} outside [1, {self.n}]")

    def _draw_interval(self, a, b, size):
        # inverse cdf restricted to [a, b]; zero-weight positions are skipped
        cdf = self.hidden.cdf
        lo, hi = cdf[np.asarray(a) - 1], cdf[np.asarray(b)]
        u = lo + self.rng.random(size) * (hi - lo)
        idx = np.searchsorted(cdf, u, side="right")
        return np.clip(idx, a, b)

    def samp(self, size: int | None = None):
        self._charge(Kind.SAMP, 1 if size is None else size)
        out = self._draw_interval(1, self.n, 1 if size is None else size)
        return int(out[0]) if size is None else out

    def cond(self, S: Iterable[int], size: int | None = None):
        idx = np.unique(np.asarray(list(S), dtype=np.int64))
        if idx.size == 0:
            raise ValueError("cannot condition on the empty set")
        if idx[0] < 1 or idx[-1] > self.n:
            raise IndexError("conditioning set leaves [1, n]")
        count = 1 if size is None else size
        self._charge(Kind.COND, count, idx.size)
        w = self.hidden.weights[idx - 1]
        total = float(w.sum())
        if total <= 0:
            raise ZeroMassError("COND on a zero-mass set")
        cum = np.cumsum(w)
        u = self.rng.random(count) * total
        pick = np.minimum(np.searchsorted(cum, u, side="right"), idx.size - 1)
        out = idx[pick]
        return int(out[0]) if size is None else out

    def intcond(self, a: int, b: int, size: int | None = None):
        if a > b:
            raise ValueError("interval needs a <= b")
        self._check_index(a)
        self._check_index(b)
        count = 1 if size is None else size
        self._charge(Kind.INTCOND, count, a, b)
        if self.hidden.mass(a, b) <= 0:
            raise ZeroMassError(f"INTCOND on zero-mass interval [{a}, {b}]")
        out = self._draw_interval(a, b, count)
        return int(out[0]) if size is None else out

    def paircond(self, x: int, y: int, size: int | None = None):
        self._check_index(x)
        self._check_index(y)
        count = 1 if size is None else size
        self._charge(Kind.PAIRCOND, count, x, y)
        px, py = self.hidden(x), self.hidden(y)
        if x == y:
            if px <= 0:
                raise ZeroMassError("PAIRCOND on a zero-mass pair")
            out = np.full(count, x)
        else:
            if px + py <= 0:
                raise ZeroMassError("PAIRCOND on a zero-mass pair")
            out = np.where(self.rng.random(count) * (px + py) < px, x, y)
        return int(out[0]) if size is None else out

    def eval(self, x):
        xs = np.atleast_1d(np.asarray(x, dtype=np.int64))
        if xs.size and (xs.min() < 1 or xs.max() > self.n):
            raise IndexError("EVAL outside [1, n]")
        self._charge(Kind.EVAL, xs.size, *(xs.tolist() if self.record else ()))
        vals = self.hidden.weights[xs - 1]
        return float(vals[0]) if np.ndim(x) == 0 else vals.copy()

    def ceval(self, j):
        """Mass of {1..j}; j = 0 is accepted and answers 0."""
        js = np.atleast_1d(np.asarray(j, dtype=np.int64))
        if js.size and (js.min() < 0 or js.max() > self.n):
            raise IndexError("CEVAL outside [0, n]")
        self._charge(Kind.CEVAL, js.size, *(js.tolist() if self.record else ()))
        vals = self.hidden.cdf[js]
        return float(vals[0]) if np.ndim(j) == 0 else vals.copy()

    # Batched summaries. Each entry stands for ``size`` independent conditional
    # queries; only the number landing in the upper part is reported, which is
    # a binomial draw with exactly the law of the full transcript's count.

    def split_counts(self, lo, mid, hi, size: int, kind: Kind = Kind.COND) -> np.ndarray:
        """For each interval [lo, hi]: answers falling in (mid, hi] out of ``size``."""
        lo, mid, hi = (np.atleast_1d(np.asarray(v, dtype=np.int64)) for v in (lo, mid, hi))
        if kind not in (Kind.COND, Kind.INTCOND):
            raise ValueError("split counts are served by COND or INTCOND")
        if np.any(lo > mid) or np.any(mid >= hi) or lo.min() < 1 or hi.max() > self.n:
            raise ValueError("need 1 <= lo <= mid < hi <= n")
        self._charge(kind, size * lo.size, "split", lo.tolist(), mid.tolist(), hi.tolist())
        cdf = self.hidden.cdf
        total = cdf[hi] - cdf[lo - 1]
        if np.any(total <= 0):
            raise ZeroMassError("conditioning on a zero-mass interval")
        p = np.clip((cdf[hi] - cdf[mid]) / total, 0.0, 1.0)
        return self.rng.binomial(size, p)

    def pair_counts(self, xs, ys, size: int, kind: Kind = Kind.COND) -> np.ndarray:
        """For each pair {x, y}: answers equal to y out of ``size``."""
        xs = np.atleast_1d(np.asarray(xs, dtype=np.int64))
        ys = np.atleast_1d(np.asarray(ys, dtype=np.int64))
        if kind not in (Kind.COND, Kind.PAIRCOND):
            raise ValueError("pair counts are served by COND or PAIRCOND")
        if np.any(xs == ys):
            raise ValueError("pair counts need distinct points")
        if xs.size and (min(xs.min(), ys.min()) < 1 or max(xs.max(), ys.max()) > self.n):
            raise IndexError("pair outside [1, n]")
        self._charge(kind, size * xs.size, "pairs", xs.tolist(), ys.tolist())
        w = self.hidden.weights
        px, py = w[xs - 1], w[ys - 1]
        total = px + py
        if np.any(total <= 0):
            raise ZeroMassError("conditioning on a zero-mass pair")
        return self.rng.binomial(size, np.clip(py / total, 0.0, 1.0))
