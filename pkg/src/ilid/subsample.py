"""Index plans that turn one length-T context into S shortened, equal-length variants."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SubsamplePlan:
    T: int
    index_sets: tuple
    descriptor: dict

    def __post_init__(self):
        sets = tuple(tuple(int(i) for i in s) for s in self.index_sets)
        if len(sets) < 2:
            raise ValueError("a plan needs at least two subsamples")
        lengths = {len(s) for s in sets}
        if len(lengths) != 1:
            raise ValueError(f"index sets have unequal lengths {sorted(lengths)}")
        if lengths.pop() < 2:
            raise ValueError("subsample length must be >= 2")
        for s in sets:
            if any(b <= a for a, b in zip(s, s[1:])):
                raise ValueError(f"index set {s} is not strictly increasing")
            if s[0] < 0 or s[-1] >= self.T:
                raise ValueError(f"index set {s} leaves [0, {self.T})")
        object.__setattr__(self, "index_sets", sets)

    @property
    def S(self) -> int:
        return len(self.index_sets)

    @property
    def length(self) -> int:
        return len(self.index_sets[0])

    def to_dict(self) -> dict:
        return {"descriptor": dict(self.descriptor), "T": self.T,
                "index_sets": [list(s) for s in self.index_sets]}

    @classmethod
    def from_dict(cls, d: dict) -> "SubsamplePlan":
        return cls(int(d["T"]), d["index_sets"], d["descriptor"])


def stride_plan(T: int, s: int, offsets) -> SubsamplePlan:
    """Every ``s``-th index from each offset, truncated to a common length.

    ``stride_plan(T, 2, [0, 1])`` is the odd/even split.
    """
    offsets = [int(o) for o in offsets]
    if s < 2:
        raise ValueError(f"stride must be >= 2, got {s}")
    if len(offsets) < 2:
        raise ValueError("need at least two offsets")
    if len(set(offsets)) != len(offsets):
        raise ValueError(f"duplicate offsets {offsets}")
    if any(o < 0 or o >= T for o in offsets):
        raise ValueError(f"offsets must lie in [0, {T})")
    sets = [list(range(o, T, s)) for o in offsets]
    ell = min(len(x) for x in sets)
    if ell < 2:
        raise ValueError(f"stride {s} with offsets {offsets} leaves subsample length {ell} < 2")
    return SubsamplePlan(T, [x[:ell] for x in sets],
                         {"kind": "stride", "stride": s, "offsets": offsets})


def random_fraction_plan(T: int, fraction: float, S: int, seed: int) -> SubsamplePlan:
    """``S`` sorted uniform draws (without replacement) of ``round(fraction*T)`` indices.

    Uses its own generator so the defender's draws never share a stream with
    attack randomness. Sets may overlap.
    """
    if not 0 < fraction < 1:
        raise ValueError(f"fraction must be in (0, 1), got {fraction}")
    if S < 2:
        raise ValueError("need S >= 2")
    ell = int(round(fraction * T))
    if ell < 2:
        raise ValueError(f"fraction {fraction} of T={T} gives subsample length {ell} < 2")
    rng = np.random.default_rng(seed)
    sets = [np.sort(rng.choice(T, size=ell, replace=False)).tolist() for _ in range(S)]
    return SubsamplePlan(T, sets, {"kind": "random_fraction", "fraction": fraction,
                                   "S": S, "seed": seed})


def plan_from_descriptor(T: int, descriptor: dict) -> SubsamplePlan:
    kind = descriptor.get("kind")
    if kind == "stride":
        return stride_plan(T, int(descriptor["stride"]), descriptor["offsets"])
    if kind == "random_fraction":
        return random_fraction_plan(T, float(descriptor["fraction"]), int(descriptor["S"]),
                                    int(descriptor["seed"]))
    raise ValueError(f"unknown subsample descriptor kind {kind!r}")


def apply_plan(window, plan: SubsamplePlan) -> list[np.ndarray]:
    """Gather each index set from the window context (or a bare context array)."""
    ctx = np.asarray(getattr(window, "context", window), dtype=float)
    if ctx.size != plan.T:
        raise ValueError(f"plan built for T={plan.T} applied to context of length {ctx.size}")
    return [ctx[list(s)] for s in plan.index_sets]
