"""Perfect-information backward dynamic programming over the backlog level.

The trace (supply, demand, prices) is known in advance. The state is the
shiftable backlog on a uniform grid; the control is the amount served this
slot. Essential load uses the closed-form stage-1 split, and a served amount
is met from the cheaper of residual renewables (opportunity cost gamma) and
grid power (price p). A terminal penalty per kWh of leftover backlog keeps the
optimum from deferring forever.

``enumerate_oracle`` brute-forces every discretised control sequence,
including the essential split, and exists to validate ``solve_backward``.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from resgrid.errors import ConfigurationError, InfeasibleDemandError, InstanceTooLargeError
from resgrid.lyapunov import BALANCE_TOL, Dispatch, SlotObservation, instantaneous_cost, stage1_essential, stage2_residuals

_GRID_EPS = 1e-9
MAX_ENUMERATION = 10**7
MAX_ENUMERATION_HORIZON = 5


@dataclass(frozen=True)
class DpGrid:
    """Discretisation of the backlog state and the served-amount control.

    ``q_max`` caps the backlog grid; states above it are treated as
    infeasible. ``None`` sizes the grid to hold every arrival of the trace.
    """

    q_step: float = 0.25
    u_step: float = 0.25
    horizon: int = 1
    q_max: float | None = None

    def __post_init__(self) -> None:
        if not (self.q_step > 0 and self.u_step > 0):
            raise ConfigurationError("grid steps must be positive")
        if self.horizon < 1:
            raise ConfigurationError("horizon must be at least one slot")

    def level_index(self, q):
        """Nearest grid level, ties rounded toward zero."""
        return np.ceil(np.asarray(q) / self.q_step - 0.5 - _GRID_EPS).astype(np.int64)

    def discretization_bound(self, p_max: float) -> float:
        """Cost error bound ``q_step * p_max * T`` used when comparing against the DP."""
        return self.q_step * p_max * self.horizon


@dataclass
class ValueTable:
    """Cost-to-go ``J[t, i]`` and the optimal served amount per cell."""

    grid: DpGrid
    J: np.ndarray
    u_star: np.ndarray
    g_s_star: np.ndarray
    s_s_star: np.ndarray
    terminal_penalty: float

    @property
    def q_levels(self) -> np.ndarray:
        return np.arange(self.J.shape[1]) * self.grid.q_step

    def cost_to_go(self, q0: float = 0.0, t: int = 0) -> float:
        return float(self.J[t, int(self.grid.level_index(q0))])

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["t", "q_level", "J", "g_s_star", "s_s_star"])
            T = self.u_star.shape[0]
            for t in range(T):
                for i in np.flatnonzero(np.isfinite(self.J[t])):
                    writer.writerow([
                        t,
                        repr(float(i * self.grid.q_step)),
                        repr(float(self.J[t, i])),
                        repr(float(self.g_s_star[t, i])),
                        repr(float(self.s_s_star[t, i])),
                    ])


@dataclass
class DpRollout:
    dispatches: list[Dispatch]
    queue: list[float]
    slot_costs: list[float]
    terminal_backlog: float
    terminal_penalty: float

    @property
    def operating_cost(self) -> float:
        return math.fsum(self.slot_costs)

    @property
    def total_cost(self) -> float:
        return self.operating_cost + self.terminal_penalty * self.terminal_backlog


def _check_trace(trace: Sequence[SlotObservation]) -> None:
    if not trace:
        raise ConfigurationError("trace is empty")
    for t, obs in enumerate(trace):
        if obs.A_e > obs.S + obs.g_max + BALANCE_TOL:
            raise InfeasibleDemandError("essential demand exceeds supply plus grid capacity", slot=t)


def split_service(u, obs: SlotObservation, s_res: float, g_res: float):
    """Meet a served amount from the cheaper source first: returns ``(g_s, s_s)``."""
    if obs.p >= obs.gamma:
        s_s = np.minimum(u, s_res)
        return u - s_s, s_s
    g_s = np.minimum(u, g_res)
    return g_s, u - g_s


def default_terminal_penalty(trace: Sequence[SlotObservation]) -> float:
    return max(obs.p for obs in trace)


def _stage_terms(obs: SlotObservation):
    g_e, s_e = stage1_essential(obs)
    s_res, g_res = stage2_residuals(obs, s_e, g_e)
    return g_e, s_e, s_res, g_res


def solve_backward(
    trace: Sequence[SlotObservation],
    grid: DpGrid,
    q0: float = 0.0,
    terminal_penalty: float | None = None,
) -> tuple[ValueTable, ValueTable]:
    """Backward recursion ``J_t(q) = min_u C_t(u) + J_{t+1}(q')``.

    Returns the value table twice, as ``(table, policy)``: the table carries
    the argmin controls, so it doubles as the policy for ``rollout``.
    Among equal-cost controls the largest served amount wins.
    """
    _check_trace(trace)
    T = len(trace)
    if T != grid.horizon:
        raise ConfigurationError(f"trace has {T} slots but grid horizon is {grid.horizon}")
    lam = default_terminal_penalty(trace) if terminal_penalty is None else float(terminal_penalty)
    i0 = int(grid.level_index(q0))
    if abs(i0 * grid.q_step - q0) > _GRID_EPS:
        raise ConfigurationError(f"initial backlog {q0} is not a grid level")

    arrivals = np.array([obs.A_s for obs in trace])
    reach = q0 + np.concatenate([[0.0], np.cumsum(arrivals)])
    top = reach[-1] if grid.q_max is None else min(grid.q_max, reach[-1])
    n_levels = int(grid.level_index(top)) + 2
    if grid.q_max is not None:
        n_levels = min(n_levels, int(math.floor(grid.q_max / grid.q_step + _GRID_EPS)) + 1)
    n_levels = max(n_levels, i0 + 1)
    reach_idx = np.minimum(grid.level_index(reach) + 1, n_levels - 1)

    q_levels = np.arange(n_levels) * grid.q_step
    aligned = abs(grid.q_step - grid.u_step) <= _GRID_EPS * grid.q_step
    J = np.full((T + 1, n_levels), np.inf)
    J[T] = lam * q_levels
    u_star = np.zeros((T, n_levels))
    g_s_star = np.zeros((T, n_levels))
    s_s_star = np.zeros((T, n_levels))

    for t in range(T - 1, -1, -1):
        obs = trace[t]
        g_e, s_e, s_res, g_res = _stage_terms(obs)
        n_u = int(math.floor((s_res + g_res) / grid.u_step + _GRID_EPS)) + 1
        u = np.arange(n_u) * grid.u_step
        g_s, s_s = split_service(u, obs, s_res, g_res)
        cost = obs.p * (g_e + g_s) - obs.gamma * (obs.S - s_e - s_s)

        hi = int(reach_idx[t]) + 1
        a_idx = obs.A_s / grid.q_step
        if aligned and abs(a_idx - round(a_idx)) <= _GRID_EPS:
            best, k = _backup_aligned(cost, J[t + 1], hi, int(round(a_idx)))
        else:
            best, k = _backup_general(cost, u, q_levels[:hi], obs.A_s, J[t + 1], grid)
        J[t, :hi] = best
        reachable = np.isfinite(best)
        u_star[t, :hi] = np.where(reachable, u[k], 0.0)
        g_s_star[t, :hi] = np.where(reachable, g_s[k], 0.0)
        s_s_star[t, :hi] = np.where(reachable, s_s[k], 0.0)

    table = ValueTable(grid, J, u_star, g_s_star, s_s_star, lam)
    return table, table


def _tie_tol(best: np.ndarray) -> np.ndarray:
    return 1e-12 * (1.0 + np.abs(best))


def _backup_aligned(cost: np.ndarray, j_next: np.ndarray, hi: int, a: int):
    # State and control share one step, so serving k steps from level i lands
    # exactly on level i - k + a; k > i would over-serve and is excluded.
    n_levels = len(j_next)
    best = np.full(hi, np.inf)
    arg = np.zeros(hi, dtype=np.int64)
    for k in range(min(len(cost), hi)):
        stop = min(hi, n_levels - a + k)
        if stop <= k:
            continue
        cand = cost[k] + j_next[a : a + stop - k]
        cur = best[k:stop]
        take = cand <= cur + _tie_tol(cur)
        take &= np.isfinite(cand)
        cur[take] = np.minimum(cand[take], cur[take])
        arg[k:stop][take] = k
    return best, arg


def _backup_general(cost, u, q, a_s, j_next, grid: DpGrid):
    n_levels = len(j_next)
    nxt = np.maximum(q[:, None] - u[None, :], 0.0) + a_s
    j = grid.level_index(nxt)
    feasible = (u[None, :] <= q[:, None] + _GRID_EPS) & (j < n_levels)
    vals = np.full(nxt.shape, np.inf)
    vals[feasible] = cost[np.nonzero(feasible)[1]] + j_next[j[feasible]]
    # reversed argmin picks the largest served amount among ties
    rev = vals[:, ::-1]
    best = rev.min(axis=1)
    tied = rev <= (best + _tie_tol(best))[:, None]
    return best, len(u) - 1 - np.argmax(tied, axis=1)


def rollout(policy: ValueTable, trace: Sequence[SlotObservation], q0: float = 0.0) -> DpRollout:
    """Apply the DP policy forward on ``trace`` starting from backlog ``q0``."""
    _check_trace(trace)
    grid = policy.grid
    n_levels = policy.u_star.shape[1]
    q = float(q0)
    dispatches, queue, costs = [], [], []
    for t, obs in enumerate(trace):
        g_e, s_e, s_res, g_res = _stage_terms(obs)
        i = min(int(grid.level_index(q)), n_levels - 1)
        u = min(float(policy.u_star[t, i]), q, s_res + g_res)
        g_s, s_s = (float(x) for x in split_service(u, obs, s_res, g_res))
        d = Dispatch(g_e=g_e, g_s=g_s, s_e=s_e, s_s=s_s, s_p=max(s_res - s_s, 0.0))
        dispatches.append(d)
        queue.append(q)
        costs.append(instantaneous_cost(d, obs))
        q = max(q - u, 0.0) + obs.A_s
    return DpRollout(dispatches, queue, costs, q, policy.terminal_penalty)


def _grid_values(upper: float, step: float) -> list[float]:
    if upper < -BALANCE_TOL:
        return []
    n = int(math.floor(max(upper, 0.0) / step + _GRID_EPS))
    return [k * step for k in range(n + 1)]


def enumerate_oracle(
    trace: Sequence[SlotObservation],
    grid: DpGrid,
    q0: float = 0.0,
    terminal_penalty: float | None = None,
) -> float:
    """Minimum total cost over every discretised control sequence.

    Controls ``(s_e, s_s, g_s)`` range independently over multiples of the
    control step subject to the slot's supply, grid and essential-balance
    constraints. Transitions and the terminal penalty match ``solve_backward``.
    """
    _check_trace(trace)
    T = len(trace)
    if T > MAX_ENUMERATION_HORIZON:
        raise InstanceTooLargeError(f"horizon {T} exceeds {MAX_ENUMERATION_HORIZON}")
    lam = default_terminal_penalty(trace) if terminal_penalty is None else float(terminal_penalty)
    step = grid.u_step

    options: list[list[tuple[float, float]]] = []
    for obs in trace:
        slot = []
        for s_e in _grid_values(min(obs.S, obs.A_e), step):
            g_e = obs.A_e - s_e
            if g_e > obs.g_max + BALANCE_TOL:
                continue
            for s_s in _grid_values(obs.S - s_e, step):
                for g_s in _grid_values(obs.g_max - g_e, step):
                    cost = obs.p * (g_e + g_s) - obs.gamma * (obs.S - s_e - s_s)
                    slot.append((cost, g_s + s_s))
        options.append(slot)

    combos = math.prod(len(o) for o in options)
    if combos > MAX_ENUMERATION:
        raise InstanceTooLargeError(f"{combos} control sequences exceed {MAX_ENUMERATION}")

    q_cap = math.inf if grid.q_max is None else grid.q_max + _GRID_EPS
    best = math.inf
    for seq in itertools.product(*options):
        q = q0
        total = 0.0
        for obs, (cost, served) in zip(trace, seq):
            total += cost
            q = float(grid.level_index(max(q - served, 0.0) + obs.A_s)) * grid.q_step
            if q > q_cap:
                total = math.inf
                break
        total += lam * q
        best = min(best, total)
    return best
