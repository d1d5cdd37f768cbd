"""Discriminant gains (symmetric-KL separability per dimension) and
importance-ordered feature selection.

The gain table is computed once per model; selection is independent of the
data sample, so the server can plan future slots without seeing features.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .statmodel import GmModel


def pairwise_gain(model: GmModel, l: int, lp: int, subset) -> float:
    """Discriminant gain between two classes over a dimension subset.

    ``sum_{n in S} (mu_l(n) - mu_l'(n))**2 / C_nn`` -- the symmetric KL
    divergence between the two class Gaussians restricted to S.  Symmetric
    in the pair and zero on the empty set.
    """
    if l == lp:
        raise ValueError("class pair must be distinct")
    L = model.n_classes
    if not (1 <= l <= L and 1 <= lp <= L):
        raise ValueError(f"classes must be in 1..{L}")
    idx = np.asarray(sorted(int(n) for n in subset), dtype=int)
    if idx.size == 0:
        return 0.0
    if idx[0] < 1 or idx[-1] > model.n_features:
        raise ValueError("subset indices out of range")
    pos = idx - 1
    d = model.centroids[l - 1, pos] - model.centroids[lp - 1, pos]
    return float(np.sum(d * d / model.variances[pos]))


def average_gain(model: GmModel, subset) -> float:
    """Discriminant gain averaged over all L(L-1)/2 class pairs.

    Additive over disjoint subsets; equal to :func:`pairwise_gain` when
    L = 2.
    """
    L = model.n_classes
    pairs = list(combinations(range(1, L + 1), 2))
    return sum(pairwise_gain(model, l, lp, subset) for l, lp in pairs) / len(pairs)


@dataclass(frozen=True)
class GainTable:
    """Per-dimension average gains plus the importance order.

    ``per_dim[n-1]`` is the average gain of dimension ``n``; ``order`` lists
    the 1-based dimensions by descending gain, ties broken toward the lower
    index.
    """

    per_dim: np.ndarray
    order: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.per_dim, dtype=float)
        o = np.asarray(self.order, dtype=int)
        if np.any(g < 0):
            raise ValueError("gains must be >= 0")
        if sorted(o.tolist()) != list(range(1, g.size + 1)):
            raise ValueError("order must be a permutation of 1..N")
        ordered = g[o - 1]
        if np.any(np.diff(ordered) > 0):
            raise ValueError("order must sort gains in descending order")
        g.setflags(write=False)
        o.setflags(write=False)
        object.__setattr__(self, "per_dim", g)
        object.__setattr__(self, "order", o)

    @property
    def n_features(self) -> int:
        return self.per_dim.size


def build_gain_table(model: GmModel) -> GainTable:
    """Average per-dimension gains of a model, sorted for greedy selection."""
    L = model.n_classes
    per_dim = np.zeros(model.n_features)
    for l, lp in combinations(range(L), 2):
        d = model.centroids[l] - model.centroids[lp]
        per_dim += d * d / model.variances
    per_dim *= 2.0 / (L * (L - 1))
    # stable sort on the negated gains: equal gains keep index order
    order = np.argsort(-per_dim, kind="stable") + 1
    return GainTable(per_dim=per_dim, order=order)


@dataclass(frozen=True)
class SelectionPlan:
    """Greedy per-slot feature subsets and their concatenation.

    ``subsets[k]`` holds the 1-based dimensions planned for slot k+1, in
    descending-gain order; ``flattened`` is their concatenation.
    """

    subsets: tuple[tuple[int, ...], ...]
    flattened: tuple[int, ...]

    def __post_init__(self):
        flat = tuple(n for s in self.subsets for n in s)
        if flat != tuple(self.flattened):
            raise ValueError("flattened must equal the concatenated subsets")
        if len(set(flat)) != len(flat):
            raise ValueError("planned subsets must be pairwise disjoint")


def select_features(table: GainTable, received, rates) -> SelectionPlan:
    """Plan future slots greedily by descending gain.

    Slot ``k`` takes the next ``min(remaining, rates[k])`` not-yet-planned,
    not-yet-received dimensions in table order, so every prefix of the
    flattened plan is a maximum-gain admissible subset of its size.
    """
    received = frozenset(int(n) for n in received)
    if any(not 1 <= n <= table.n_features for n in received):
        raise ValueError("received indices out of range")
    admissible = [int(n) for n in table.order if int(n) not in received]
    subsets: list[tuple[int, ...]] = []
    pos = 0
    for rate in rates:
        rate = int(rate)
        if rate < 0:
            raise ValueError("rates must be >= 0")
        take = min(len(admissible) - pos, rate)
        subsets.append(tuple(admissible[pos:pos + take]))
        pos += take
    return SelectionPlan(subsets=tuple(subsets),
                         flattened=tuple(admissible[:pos]))


def unreceived_gains_desc(table: GainTable, received) -> np.ndarray:
    """Gains of the not-yet-received dimensions, descending (selection order)."""
    received = frozenset(int(n) for n in received)
    keep = [int(n) for n in table.order if int(n) not in received]
    return table.per_dim[np.asarray(keep, dtype=int) - 1] if keep else np.zeros(0)
