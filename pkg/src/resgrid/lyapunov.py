"""Online drift-plus-penalty controller for the shiftable-demand queue.

Each slot the controller observes prices, renewable supply and demand, then
minimises ``V*C(t) - (Q+Z)*(G_s+S_s)`` in two stages: essential load first
(a one-variable linear program), then the shiftable backlog through a
threshold rule on ``Q+Z`` against ``V*p`` and ``V*gamma``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from resgrid.errors import DomainError, InfeasibleDemandError, RationalPricingError

BALANCE_TOL = 1e-9


@dataclass(frozen=True, slots=True)
class SlotObservation:
    """Everything the controller sees at the start of a slot (energies in kWh)."""

    p: float
    gamma: float
    S: float
    A_e: float
    A_s: float
    g_max: float
    s_max: float

    def __post_init__(self) -> None:
        for name in ("p", "gamma", "S", "A_e", "A_s", "g_max", "s_max"):
            if not getattr(self, name) >= 0:
                raise DomainError(f"observation field {name} must be nonnegative")
        if self.S > self.s_max + BALANCE_TOL:
            raise DomainError(f"supply {self.S} exceeds s_max {self.s_max}")


@dataclass(frozen=True, slots=True)
class QueueState:
    q: float = 0.0
    z: float = 0.0

    def __post_init__(self) -> None:
        if self.q < 0 or self.z < 0:
            raise DomainError("queue levels must be nonnegative")


@dataclass(frozen=True, slots=True)
class LyapunovParams:
    v: float = 10.0
    epsilon: float = 1.0

    def __post_init__(self) -> None:
        if not self.v > 0:
            raise DomainError("v must be positive")
        if not self.epsilon > 0:
            raise DomainError("epsilon must be positive")


@dataclass(frozen=True, slots=True)
class Dispatch:
    g_e: float = 0.0
    g_s: float = 0.0
    s_e: float = 0.0
    s_s: float = 0.0
    s_p: float = 0.0
    curtailed: float = 0.0

    @property
    def grid(self) -> float:
        return self.g_e + self.g_s

    @property
    def served(self) -> float:
        return self.g_s + self.s_s

    def check(self, obs: SlotObservation, tol: float = BALANCE_TOL) -> None:
        """Raise ``AssertionError`` if any balance or capacity identity fails."""
        fields = (self.g_e, self.g_s, self.s_e, self.s_s, self.s_p, self.curtailed)
        assert min(fields) >= -tol, f"negative dispatch component in {self}"
        assert abs(self.s_e + self.s_s + self.s_p + self.curtailed - obs.S) <= tol, "supply balance violated"
        assert abs(self.g_e + self.s_e - obs.A_e) <= tol, "essential balance violated"
        assert self.g_e + self.g_s <= obs.g_max + tol, "grid capacity exceeded"


CASE_SELL = "I"
CASE_RENEWABLE = "II"
CASE_ARBITRAGE = "III"
CASE_SERVE = "IV"


def instantaneous_cost(d: Dispatch, obs: SlotObservation) -> float:
    """Purchase cost minus sale revenue for one slot, in cents."""
    return obs.p * (d.g_e + d.g_s) - obs.gamma * d.s_p


def stage1_essential(obs: SlotObservation) -> tuple[float, float]:
    """Split essential demand between grid and renewables: returns ``(g_e, s_e)``."""
    if obs.A_e > obs.S + obs.g_max + BALANCE_TOL:
        raise InfeasibleDemandError(
            f"essential demand {obs.A_e} exceeds supply {obs.S} plus grid capacity {obs.g_max}"
        )
    if obs.p < obs.gamma:
        g_e = min(obs.g_max, obs.A_e)
        s_e = max(obs.A_e - g_e, 0.0)
    else:
        s_e = min(obs.S, obs.A_e)
        g_e = max(obs.A_e - s_e, 0.0)
    return g_e, s_e


def stage2_residuals(obs: SlotObservation, s_e: float, g_e: float) -> tuple[float, float]:
    """Renewable and grid capacity left for shiftable load: ``(s_res, g_res)``."""
    return max(obs.S - s_e, 0.0), max(obs.g_max - g_e, 0.0)


def classify(obs: SlotObservation, queues: QueueState, params: LyapunovParams) -> str:
    """Threshold case for the slot. Ties go to the serving side."""
    w = queues.q + queues.z
    buy_hi = params.v * obs.p > w
    sell_hi = params.v * obs.gamma > w
    if buy_hi and sell_hi:
        return CASE_SELL
    if buy_hi:
        return CASE_RENEWABLE
    if sell_hi:
        return CASE_ARBITRAGE
    return CASE_SERVE


def stage2_shiftable(
    obs: SlotObservation,
    queues: QueueState,
    params: LyapunovParams,
    s_res: float,
    g_res: float,
) -> tuple[float, float, float]:
    """Serve the backlog per the threshold case: returns ``(g_s, s_s, s_p)``."""
    case = classify(obs, queues, params)
    q = queues.q
    if case == CASE_SELL:
        return 0.0, 0.0, s_res
    if case == CASE_ARBITRAGE:
        raise RationalPricingError(
            f"case III reached (p={obs.p} < gamma={obs.gamma}); rational pricing is violated"
        )
    if case == CASE_SERVE and obs.p < obs.gamma:
        raise RationalPricingError(
            f"case IV with p={obs.p} < gamma={obs.gamma}; rational pricing is violated"
        )
    s_s = min(s_res, q)
    g_s = 0.0 if case == CASE_RENEWABLE else min(q - s_s, g_res)
    return g_s, s_s, max(s_res - s_s, 0.0)


def decide_slot(obs: SlotObservation, queues: QueueState, params: LyapunovParams) -> Dispatch:
    g_e, s_e = stage1_essential(obs)
    s_res, g_res = stage2_residuals(obs, s_e, g_e)
    g_s, s_s, s_p = stage2_shiftable(obs, queues, params, s_res, g_res)
    return Dispatch(g_e=g_e, g_s=g_s, s_e=s_e, s_s=s_s, s_p=s_p)


def drift_penalty_objective(d: Dispatch, obs: SlotObservation, queues: QueueState, params: LyapunovParams) -> float:
    return params.v * instantaneous_cost(d, obs) - (queues.q + queues.z) * (d.g_s + d.s_s)


def update_queues(queues: QueueState, served: float, a_s: float, epsilon: float) -> QueueState:
    """Advance the real backlog and the delay-aware virtual queue by one slot."""
    if served < 0 or a_s < 0:
        raise DomainError("served and arrivals must be nonnegative")
    q_next = max(queues.q - served, 0.0) + a_s
    growth = epsilon if queues.q > 0 else 0.0
    z_next = max(queues.z - served + growth, 0.0)
    return QueueState(q_next, z_next)


def delay_bound(z_max: float, q_max: float, epsilon: float) -> int:
    """Worst-case service delay in slots when both queues stay below the given levels."""
    if not epsilon > 0:
        raise DomainError("epsilon must be positive")
    return math.ceil((z_max + q_max) / epsilon)


def lyapunov_value(queues: QueueState) -> float:
    return 0.5 * (queues.z**2 + queues.q**2)
