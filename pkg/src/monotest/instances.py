"""Benchmark and adversarial distributions, each with an optional LP certificate."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .distcore import (
    Pmf,
    distance_to_monotone_exact,
    flatten,
    mirror,
    oblivious_partition,
)

CERTIFY_MAX_N = 2**12


def gen_uniform(n: int) -> Pmf:
    return Pmf.uniform(n)


def gen_random_monotone(n: int, seed=0) -> Pmf:
    """Uniform random weights sorted in decreasing order, normalized."""
    w = np.sort(np.random.default_rng(seed).random(n))[::-1]
    return Pmf(w / w.sum())


def gen_staircase(n: int, alpha: float = 0.1) -> Pmf:
    """Harmonic weights averaged over the blocks of the alpha-partition."""
    h = 1.0 / np.arange(1, n + 1)
    return flatten(Pmf(h / h.sum()), oblivious_partition(n, alpha))


def gen_mirror_pair(d: Pmf) -> tuple[Pmf, Pmf]:
    return d, mirror(d)


def eval_lb_kappa(eps: float) -> float:
    return 4.0 / (1.0 - 2.0 * eps)


def eval_lb_default_m(n: int, eps: float) -> int:
    """Largest feasible m whose band edges need no rounding, if one is near.

    Integral band edges keep the distance to monotone exactly eps; otherwise
    the largest feasible m is used and the floors cost a little accuracy.
    """
    ke = eval_lb_kappa(eps) * eps
    top = int(math.floor(n / (2 + ke)))
    for m in range(top, max(top - 1000, 0), -1):
        half = ke * m / 2
        if abs(half - round(half)) < 1e-9:
            return m
    return top


def eval_lb_bands(eps: float, m: int) -> tuple[int, int, int, int]:
    """Right ends of the four bands (head, gap, bump, tail)."""
    ke = eval_lb_kappa(eps) * eps
    # the tiny nudge keeps exact products such as 2.0 * 3 from flooring low
    fl = lambda v: int(math.floor(v * (1 + 1e-12)))
    return m, fl((1 + ke / 2) * m), fl((1 + ke) * m), fl((2 + ke) * m)


def gen_eval_lb_pair(n: int, eps: float, m: int | None = None) -> tuple[Pmf, Pmf]:
    """Uniform prefix versus the four-band histogram that is exactly eps-far.

    Band masses are 1/2 - eps, 0, 2 eps, 1/2 - eps. Each band carries its
    nominal density; the last element of the band absorbs the rounding slack.
    """
    if not (0 < eps < 0.5):
        raise ValueError("eps must lie in (0, 1/2)")
    if m is None:
        m = eval_lb_default_m(n, eps)
    b1, b2, b3, b4 = eval_lb_bands(eps, m)
    if m < 1 or b4 > n or not (b1 < b2 < b3 < b4):
        raise ValueError(f"band geometry infeasible for n={n}, eps={eps}, m={m}")
    d1 = np.zeros(n)
    d1[:b4] = 1.0 / b4
    d2 = np.zeros(n)
    ke = eval_lb_kappa(eps) * eps
    for (a, b), mass, width in (((0, b1), 0.5 - eps, m), ((b2, b3), 2 * eps, ke * m / 2),
                                ((b3, b4), 0.5 - eps, m)):
        # nominal density on the band, rounding slack on its last element
        d2[a:b] = mass / width
        d2[b - 1] = mass - (mass / width) * (b - a - 1)
    return Pmf(d1), Pmf(d2)


def harpeled_beta(L: int) -> float:
    return (2 * L - 1) / (2 * L)


def harpeled_base_sequence(L: int) -> np.ndarray:
    """Block i (i = 1..L) holds L^i copies of beta / (2 L L^i); sums to beta/2.

    Oriented non-increasing: the small first block carries the largest value.
    """
    if L < 2:
        raise ValueError("L must be at least 2")
    beta = harpeled_beta(L)
    return np.concatenate([np.full(L**i, beta / (2 * L * L**i)) for i in range(1, L + 1)])


def harpeled_blocks(L: int) -> list[tuple[int, int]]:
    out, start = [], 0
    for i in range(1, L + 1):
        out.append((start, start + L**i))
        start += L**i
    return out


def harpeled_max_L(n: int) -> int:
    L = 2
    while sum((L + 1) ** i for i in range(1, L + 2)) <= n:
        L += 1
    if sum(L**i for i in range(1, L + 1)) > n:
        raise ValueError(f"n={n} is too small for L=2")
    return L


def gen_harpeled_instance(L: int, modified: bool, hidden_k_seed=0, n: int | None = None) -> Pmf:
    """Block-sequence instance, zero-padded to length n (default sum of L^i).

    modified=True raises one random block to its predecessor's value (the
    first block borrows L times its own value) and rescales to total mass 1;
    the result stays non-increasing. modified=False keeps the base sequence
    and puts the missing 1 - beta/2 on one hidden position in the second half.
    """
    base = harpeled_base_sequence(L)
    size = base.size if n is None else n
    if size < base.size:
        raise ValueError("n is smaller than the block sequence")
    rng = np.random.default_rng(hidden_k_seed)
    w = np.zeros(size)
    w[:base.size] = base
    if modified:
        j = int(rng.integers(1, L + 1))
        a, b = harpeled_blocks(L)[j - 1]
        w[a:b] *= L
        w /= w.sum()
    else:
        k = int(rng.integers(size // 2 + 1, size + 1))
        w[k - 1] += 1.0 - w.sum()
    return Pmf(w)


def gen_perturbed_monotone(n: int, eps: float, seed=0, target: float = 0.6) -> Pmf:
    """Random monotone pmf mixed with a point mass so the distance lands in
    [eps/2, eps]; aims at ``target * eps``.

    Mixing weight t moves exactly t mass, so the distance never exceeds t. The
    weight is tuned by secant steps on the LP distance.
    """
    if not (0 <= eps < 1):
        raise ValueError("eps must lie in [0, 1)")
    base = gen_random_monotone(n, seed)
    if eps == 0 or n == 1:
        return base
    rng = np.random.default_rng([int(seed), 1])
    p = int(rng.integers(n // 2 + 1, n + 1))

    def build(t):
        w = (1 - t) * base.weights
        w[p - 1] += t
        return Pmf(w)

    goal = target * eps
    t = goal
    for _ in range(8):
        d = distance_to_monotone_exact(build(t))
        if abs(d - goal) <= 0.05 * eps:
            break
        t = min(eps, t * goal / max(d, 1e-12))
    return build(t)


@dataclass(frozen=True)
class Family:
    build: Callable[[int, dict], Pmf]
    monotone: bool
    defaults: dict = field(default_factory=dict)


def _harpeled(n, p, modified):
    return gen_harpeled_instance(harpeled_max_L(n), modified, int(p.get("seed", 0)), n)


FAMILIES: dict[str, Family] = {
    "uniform": Family(lambda n, p: gen_uniform(n), True),
    "random_monotone": Family(lambda n, p: gen_random_monotone(n, int(p["seed"])), True, {"seed": 0}),
    "staircase": Family(lambda n, p: gen_staircase(n, float(p["alpha"])), True, {"alpha": 0.1}),
    "staircase_mirror": Family(lambda n, p: mirror(gen_staircase(n, float(p["alpha"]))), False,
                               {"alpha": 0.1}),
    "eval_lb_d1": Family(lambda n, p: gen_eval_lb_pair(n, float(p["eps_inst"]), p.get("m"))[0], True,
                         {"eps_inst": 0.35}),
    "eval_lb_d2": Family(lambda n, p: gen_eval_lb_pair(n, float(p["eps_inst"]), p.get("m"))[1], False,
                         {"eps_inst": 0.35}),
    "harpeled_modified": Family(lambda n, p: _harpeled(n, p, True), True, {"seed": 0}),
    "harpeled_far": Family(lambda n, p: _harpeled(n, p, False), False, {"seed": 0}),
    "perturbed_monotone": Family(
        lambda n, p: gen_perturbed_monotone(n, float(p["eps_inst"]), int(p["seed"])), False,
        {"eps_inst": 0.05, "seed": 0}),
}


@dataclass(frozen=True)
class InstanceSpec:
    family: str
    n: int
    params: dict = field(default_factory=dict)
    certified: float | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; choose from {sorted(FAMILIES)}")
        if self.n < 1:
            raise ValueError("n must be positive")
        merged = {**FAMILIES[self.family].defaults, **(self.params or {})}
        object.__setattr__(self, "params", merged)

    def build(self) -> Pmf:
        return FAMILIES[self.family].build(self.n, self.params)

    def certify(self, d: Pmf | None = None) -> "InstanceSpec":
        """Attach the exact LP distance to monotone (only for n <= 2^12)."""
        if self.n > CERTIFY_MAX_N:
            return self
        d = self.build() if d is None else d
        return replace(self, certified=distance_to_monotone_exact(d))

    def to_json(self) -> dict:
        return {"family": self.family, "n": self.n, "params": dict(sorted(self.params.items())),
                "certified": self.certified}

    @classmethod
    def from_json(cls, obj: dict) -> "InstanceSpec":
        return cls(obj["family"], int(obj["n"]), dict(obj.get("params", {})), obj.get("certified"))

    def __hash__(self):
        return hash((self.family, self.n, tuple(sorted(self.params.items())), self.certified))
