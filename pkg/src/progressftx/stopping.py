"""Transmission-termination control.

Both stopping rules compare the envelope-predicted uncertainty drop of one
more slot against the per-slot cost.  Under a static channel the rule is a
marginal-reward threshold; under outage the lookahead averages the envelope
over the binomial number of successful deliveries, which keeps the
horizon-k objective convex and the same threshold structure optimal with
the cost inflated by 1/(1 - p_o).
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

from .bounds import ExpBoundParams, exp_bound
from .gains import GainTable, unreceived_gains_desc


@dataclass(frozen=True)
class StoppingPolicy:
    """Control-law constants: per-slot cost (nats), lookahead horizon in
    slots, and an optional hard entropy target that terminates early."""

    cost_per_slot: float
    horizon: int
    uncertainty_target: float | None = None

    def __post_init__(self):
        if self.cost_per_slot <= 0:
            raise ValueError("cost_per_slot must be > 0")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.uncertainty_target is not None and self.uncertainty_target < 0:
            raise ValueError("uncertainty_target must be >= 0")


@dataclass(frozen=True)
class StopDecision:
    """Outcome of one stopping evaluation.

    ``transmit`` is the binary keep-going decision, ``planned_k`` the
    number of further slots the lookahead would commit to, and ``reward``
    the predicted one-slot uncertainty reduction.
    """

    transmit: bool
    planned_k: int
    reward: float

    def __post_init__(self):
        if self.transmit != (self.planned_k >= 1):
            raise ValueError("transmit must equal planned_k >= 1")
        if self.reward < 0:
            raise ValueError("reward must be >= 0")


def gain_grid(table: GainTable, received, per_slot: int, horizon: int) -> np.ndarray:
    """Cumulative best-case gains ``G*(k)`` for k = 0..horizon.

    ``G*(k)`` sums the ``min(remaining, per_slot * k)`` largest unreceived
    gains; concave in k because greedy slot gains are non-increasing.
    """
    if per_slot < 1:
        raise ValueError("per_slot must be >= 1")
    desc = unreceived_gains_desc(table, received)
    prefix = np.concatenate([[0.0], np.cumsum(desc)])
    counts = np.minimum(desc.size, per_slot * np.arange(horizon + 1))
    return prefix[counts]


def cumulative_gain(table: GainTable, received, per_slot: int, k: int) -> float:
    """Total gain of the best admissible selection filling k slots."""
    if k < 0:
        raise ValueError("k must be >= 0")
    return float(gain_grid(table, received, per_slot, k)[k])


def _gaussian_rule(env: np.ndarray, cost: float, horizon: int) -> StopDecision:
    drops = env[:-1] - env[1:]
    below = np.nonzero(drops <= cost)[0]
    k_tilde = int(below[0]) if below.size else horizon
    planned = min(horizon, k_tilde)
    reward = float(env[0] - env[1]) if env.size > 1 else 0.0
    return StopDecision(transmit=planned >= 1, planned_k=planned, reward=reward)


def stop_gaussian(delta1: float, table: GainTable, received, per_slot: int,
                  policy: StoppingPolicy, bound: ExpBoundParams) -> StopDecision:
    """Marginal-reward stopping rule for the static channel.

    Plans ``min(horizon, k~)`` further slots, where ``k~`` is the first k
    at which the envelope drop from one more slot is <= the per-slot cost;
    equivalently the smallest minimizer of ``envelope(G*(k)) + c0 * k``.
    ``bound`` must have been calibrated for this ``delta1`` on this
    state's gain grid.
    """
    del delta1  # encoded in the calibrated bound
    grid = gain_grid(table, received, per_slot, policy.horizon)
    env = bound.c1 * np.exp(-bound.c2 * grid)
    return _gaussian_rule(env, policy.cost_per_slot, policy.horizon)


def binom_pmf(k_succ: int, k_tx: int, p_o: float) -> float:
    """P(k_succ successes out of k_tx slots), success probability 1 - p_o."""
    if not 0 <= k_succ <= k_tx:
        raise ValueError("need 0 <= k_succ <= k_tx")
    return comb(k_tx, k_succ) * (1.0 - p_o) ** k_succ * p_o ** (k_tx - k_succ)


def outage_averaged_bound(delta1: float, table: GainTable, received,
                          per_slot: int, k_tx: int, p_o: float,
                          bound: ExpBoundParams) -> float:
    """Expected envelope after k_tx transmission attempts under outage.

    Averages ``envelope(G*(k'))`` over the binomial number ``k'`` of
    successful slots; equals the envelope at zero gain when k_tx = 0.
    """
    if k_tx < 0:
        raise ValueError("k_tx must be >= 0")
    grid = gain_grid(table, received, per_slot, k_tx)
    pmf = np.array([binom_pmf(k, k_tx, p_o) for k in range(k_tx + 1)])
    env = bound.c1 * np.exp(-bound.c2 * grid)
    return float(np.dot(pmf, env))


def _fading_rule(env: np.ndarray, cost: float, horizon: int,
                 p_o: float) -> StopDecision:
    reward = float(env[0] - env[1]) if env.size > 1 else 0.0
    objective = np.empty(horizon + 1)
    for k_tx in range(horizon + 1):
        pmf = np.array([binom_pmf(k, k_tx, p_o) for k in range(k_tx + 1)])
        objective[k_tx] = np.dot(pmf, env[:k_tx + 1]) + cost * k_tx
    planned = int(np.argmin(objective))  # ties resolve to the smaller k
    transmit = reward > cost / (1.0 - p_o)
    # the threshold and the argmin agree by convexity; a mismatch (possible
    # only at exact floating-point ties) is surfaced by the invariant below
    return StopDecision(transmit=transmit, planned_k=planned, reward=reward)


def stop_fading(delta1: float, table: GainTable, received, per_slot: int,
                policy: StoppingPolicy, p_o: float,
                bound: ExpBoundParams) -> StopDecision:
    """Stopping rule under i.i.d. outage.

    Transmits iff the one-slot reward exceeds ``c0 / (1 - p_o)``; the
    committed ``planned_k`` is the smallest minimizer of the
    outage-averaged envelope plus linear cost over the horizon (the two
    agree by convexity; the test suite asserts it).
    """
    if not 0.0 <= p_o < 1.0:
        raise ValueError("p_o must be in [0, 1)")
    del delta1  # encoded in the calibrated bound
    grid = gain_grid(table, received, per_slot, policy.horizon)
    env = bound.c1 * np.exp(-bound.c2 * grid)
    return _fading_rule(env, policy.cost_per_slot, policy.horizon, p_o)


def convexity_violation(delta1: float, table: GainTable, received,
                        per_slot: int, horizon: int, p_o: float,
                        bound: ExpBoundParams) -> float:
    """Largest negative second difference of the outage-averaged envelope.

    Returns ``max_k -(Phi(k-1) + Phi(k+1) - 2 Phi(k))`` over the interior
    of the horizon; values <= ~1e-9 confirm the convexity the fading rule
    relies on.
    """
    phi = np.array([
        outage_averaged_bound(delta1, table, received, per_slot, k, p_o, bound)
        for k in range(horizon + 1)
    ])
    if phi.size < 3:
        return 0.0
    second = phi[:-2] + phi[2:] - 2.0 * phi[1:-1]
    return float(np.max(-second))
