"""Brute-force reference solvers used by the unit and acceptance tests.

They search the feasible set directly and share no code with the closed-form
controller beyond the observation container.
"""

import numpy as np

from resgrid.lyapunov import LyapunovParams, QueueState, SlotObservation


def drift_penalty_grid_min(obs: SlotObservation, queues: QueueState, params: LyapunovParams, n: int = 100):
    """Minimum of V*C - (Q+Z)*(G_s+S_s) over a (s_e, s_s, g_s) grid of step max(S, G_max)/n."""
    step = max(obs.S, obs.g_max) / n
    w = queues.q + queues.z
    # uniform grids plus each box's end points, so the feasible set is never missed
    lo_e, hi_e = max(0.0, obs.A_e - obs.g_max), min(obs.S, obs.A_e)
    s_e = np.union1d(np.arange(lo_e, hi_e, step), [lo_e, hi_e])
    s_s = np.union1d(np.arange(0.0, obs.S, step), [obs.S, min(obs.S, queues.q)])
    g_s = np.union1d(np.arange(0.0, obs.g_max, step), [obs.g_max])
    E, R, G = np.meshgrid(s_e, s_s, g_s, indexing="ij", sparse=True)
    g_e = obs.A_e - E
    feasible = (E + R <= obs.S + 1e-12) & (g_e + G <= obs.g_max + 1e-12) & (R + G <= queues.q + 1e-12)
    s_p = obs.S - E - R
    cost = obs.p * (g_e + G) - obs.gamma * s_p
    obj = params.v * cost - w * (G + R)
    obj = np.where(feasible, obj, np.inf)
    return float(obj.min()), step


def stage1_grid_min(obs: SlotObservation, v: float, n: int = 1000):
    """Minimise V*(p*G_e + gamma*S_e) with G_e + S_e = A_e over n points of S_e."""
    lo = max(0.0, obs.A_e - obs.g_max)
    hi = min(obs.S, obs.A_e)
    s_e = np.linspace(lo, hi, n)
    g_e = obs.A_e - s_e
    obj = v * (obs.p * g_e + obs.gamma * s_e)
    k = int(np.argmin(obj))
    return float(obj[k]), float(s_e[k]), (hi - lo) / max(n - 1, 1)


def random_slot(rng: np.random.Generator, allow_irrational: bool = False) -> SlotObservation:
    p = float(rng.uniform(0.05, 1.0))
    if allow_irrational and rng.random() < 0.5:
        gamma = float(rng.uniform(p, 1.5))
    else:
        gamma = float(rng.uniform(0.0, p))
    S = float(rng.uniform(0.0, 20.0)) if rng.random() > 0.1 else 0.0
    g_max = float(rng.uniform(1.0, 20.0))
    A_e = float(rng.uniform(0.0, S + g_max)) if rng.random() > 0.1 else 0.0
    return SlotObservation(p, gamma, S, A_e, float(rng.integers(0, 10)), g_max, 20.0)


def random_case_tuple(rng: np.random.Generator, case: str):
    """Observation, queues and params whose threshold case is ``case`` (I, II or IV)."""
    while True:
        obs = random_slot(rng)
        v = float(rng.uniform(0.5, 50.0))
        lo_t, hi_t = v * obs.gamma, v * obs.p
        if case == "I":
            if lo_t <= 1e-6:
                continue
            w = float(rng.uniform(0.0, lo_t))
        elif case == "II":
            if hi_t - lo_t <= 1e-6:
                continue
            w = float(rng.uniform(lo_t, hi_t))
        else:
            w = float(rng.uniform(hi_t, hi_t + 40.0))
        q = w * float(rng.random())
        return obs, QueueState(q, w - q), LyapunovParams(v=v, epsilon=1.0)


def integer_toy_trace(rng: np.random.Generator, T: int) -> list[SlotObservation]:
    """Small instances with integer energies and rational prices, sized for enumeration."""
    out = []
    for _ in range(T):
        p = float(rng.choice([0.1, 0.2, 0.3]))
        gamma = float(rng.choice([g for g in (0.0, 0.1, 0.2) if g <= p]))
        S = float(rng.integers(0, 3))
        g_max = float(rng.integers(1, 3))
        A_e = float(rng.integers(0, int(S + g_max) + 1))
        A_s = float(rng.integers(0, 3))
        out.append(SlotObservation(p, gamma, S, A_e, A_s, g_max, 2.0))
    return out

