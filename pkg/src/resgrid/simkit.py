"""Scenario assembly, the simulation loop, baselines and run metrics."""

from __future__ import annotations

import csv
import hashlib
import json
import math
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Literal, Sequence

import numpy as np

from resgrid import renewgen
from resgrid.dp_oracle import DpGrid, rollout, solve_backward
from resgrid.errors import ComparisonError, ConfigurationError, InfeasibleDemandError
from resgrid.lyapunov import (
    Dispatch,
    LyapunovParams,
    QueueState,
    SlotObservation,
    classify,
    decide_slot,
    delay_bound,
    instantaneous_cost,
    update_queues,
)
from resgrid.market import (
    REFERENCE_PRICES,
    Appliance,
    Household,
    PriceSchedule,
    arrival_cap_from_appliances,
    essential_profile,
    mean_arrival_rate,
    price_at,
    shiftable_arrivals,
)

Policy = Literal["bts_lo", "bts_dp", "pos"]
POLICIES: tuple[str, ...] = ("bts_dp", "bts_lo", "pos")
LOG_COLUMNS = (
    "t", "p", "gamma", "S", "A_e", "A_s", "g_e", "g_s", "s_e", "s_s", "s_p", "Q", "Z", "cost", "case_label",
)


@dataclass(frozen=True)
class GenerationConfig:
    solar: renewgen.SolarModel
    wind: renewgen.WindModel
    pv: renewgen.PvPanelSpec
    turbine: renewgen.WindTurbineSpec
    solar_edges: tuple[float, ...] = tuple(i / 20 for i in range(21))
    wind_edges: tuple[float, ...] = tuple(float(v) for v in range(26))

    def state_table(self, s_max: float) -> renewgen.GenerationStateTable:
        return renewgen.build_state_table(
            renewgen.intervals_from_edges(self.solar_edges),
            renewgen.intervals_from_edges(self.wind_edges, open_ended=True),
            self.solar, self.wind, self.pv, self.turbine, s_max,
        )


@dataclass(frozen=True)
class ScenarioConfig:
    """A complete, validated simulation scenario.

    Every household receives the same appliance sets. ``epsilon=None``
    selects the mean shiftable arrival rate; ``a_s_max=None`` derives the
    per-household arrival cap from the shiftable appliances' daily energy.
    """

    n_households: int
    horizon: int
    seed: int
    g_max: float
    s_max: float
    prices: PriceSchedule
    generation: GenerationConfig
    essential: tuple[Appliance, ...] = ()
    shiftable: tuple[Appliance, ...] = ()
    a_s_max: int | None = None
    v: float = 10.0
    epsilon: float | None = None
    supply_mode: renewgen.SupplyMode = "sampled"
    dp_q_step: float = 0.25
    dp_u_step: float = 0.25
    dp_q_max: float | None = None
    dp_terminal_penalty: float | None = None

    def __post_init__(self) -> None:
        if self.n_households < 1:
            raise ConfigurationError("n_households must be at least 1")
        if self.horizon < 1:
            raise ConfigurationError("horizon must be at least 1")
        if not self.g_max > 0:
            raise ConfigurationError("g_max must be positive")
        if self.s_max < 0:
            raise ConfigurationError("s_max must be nonnegative")
        if self.epsilon is not None and not self.epsilon > 0:
            raise ConfigurationError("epsilon must be positive")
        if not self.v > 0:
            raise ConfigurationError("v must be positive")
        if self.supply_mode not in ("expected", "sampled"):
            raise ConfigurationError(f"unknown supply mode {self.supply_mode!r}")

    def households(self) -> list[Household]:
        cap = self.a_s_max
        if cap is None:
            cap = arrival_cap_from_appliances(self.shiftable)
        apps = tuple(self.essential) + tuple(self.shiftable)
        return [Household(id=n, appliances=apps, a_s_max=cap) for n in range(self.n_households)]

    def lyapunov_params(self) -> LyapunovParams:
        eps = self.epsilon
        if eps is None:
            eps = mean_arrival_rate(self.households())
            if not eps > 0:
                raise ConfigurationError("epsilon has no default when no shiftable load can arrive; set it")
        return LyapunovParams(v=self.v, epsilon=eps)

    def dp_grid(self) -> DpGrid:
        return DpGrid(q_step=self.dp_q_step, u_step=self.dp_u_step, horizon=self.horizon, q_max=self.dp_q_max)


@dataclass(frozen=True)
class ScenarioTrace:
    """Exogenous inputs for every slot; shared by all policies for one seed."""

    observations: tuple[SlotObservation, ...]

    def __len__(self) -> int:
        return len(self.observations)

    def __iter__(self):
        return iter(self.observations)

    def __getitem__(self, t):
        return self.observations[t]

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(o, name) for o in self.observations])

    @property
    def digest(self) -> str:
        h = hashlib.sha256()
        for name in ("p", "gamma", "S", "A_e", "A_s", "g_max", "s_max"):
            h.update(self.column(name).tobytes())
        return h.hexdigest()[:16]


def build_trace(config: ScenarioConfig) -> ScenarioTrace:
    """Draw supply and arrivals from independent sub-streams of the scenario seed."""
    supply_seq, arrival_seq = np.random.SeedSequence(config.seed).spawn(2)
    households = config.households()
    T = config.horizon
    table = config.generation.state_table(config.s_max)
    S = renewgen.supply_trace(T, table, config.supply_mode, np.random.default_rng(supply_seq))
    A_e = essential_profile(households, T)
    A_s = shiftable_arrivals(households, T, np.random.default_rng(arrival_seq))
    obs = []
    for t in range(T):
        p, gamma = price_at(t, config.prices)
        obs.append(SlotObservation(p, gamma, float(S[t]), float(A_e[t]), float(A_s[t]), config.g_max, config.s_max))
    return ScenarioTrace(tuple(obs))


@dataclass(frozen=True, slots=True)
class SlotRecord:
    t: int
    observation: SlotObservation
    dispatch: Dispatch
    queues_before: QueueState
    queues: QueueState
    cost: float
    case_label: str

    def row(self) -> list:
        o, d = self.observation, self.dispatch
        return [
            self.t, o.p, o.gamma, o.S, o.A_e, o.A_s,
            d.g_e, d.g_s, d.s_e, d.s_s, d.s_p,
            self.queues.q, self.queues.z, self.cost, self.case_label,
        ]


@dataclass(frozen=True)
class FifoReport:
    delays: tuple[int, ...]
    pending: int

    @property
    def worst(self) -> int:
        return max(self.delays, default=0)


class FifoTracker:
    """Backlog as unit granules stamped with the slot they enter the queue.

    A granule's delay is the slot in which its last fraction is served minus
    its entry slot, so a unit served in the first slot it is queued has delay 0.
    """

    def __init__(self, unit: float = 1.0, tol: float = 1e-9):
        self.unit = unit
        self.tol = tol
        self._queue: deque[list] = deque()
        self.delays: list[int] = []

    def arrive(self, slot: int, amount: float) -> None:
        whole, rest = divmod(amount, self.unit)
        for _ in range(int(whole)):
            self._queue.append([slot, self.unit])
        if rest > self.tol:
            self._queue.append([slot, rest])

    def serve(self, slot: int, amount: float) -> None:
        while amount > self.tol and self._queue:
            head = self._queue[0]
            take = min(amount, head[1])
            head[1] -= take
            amount -= take
            if head[1] <= self.tol:
                self._queue.popleft()
                self.delays.append(slot - head[0])

    @property
    def backlog(self) -> float:
        return sum(g[1] for g in self._queue)

    def __len__(self) -> int:
        return len(self._queue)


def fifo_delay_tracker(records: Iterable[SlotRecord], unit: float = 1.0) -> FifoReport:
    """Replay service and arrivals of a run through a FIFO granule queue."""
    tracker = FifoTracker(unit)
    for rec in records:
        tracker.serve(rec.t, rec.dispatch.served)
        tracker.arrive(rec.t + 1, rec.observation.A_s)
    return FifoReport(tuple(tracker.delays), len(tracker))


def pos_policy(obs: SlotObservation, q: float) -> Dispatch:
    """Purchasing-only baseline: renewables first, grid as last resort, never sells."""
    if obs.A_e > obs.S + obs.g_max + 1e-9:
        raise InfeasibleDemandError(
            f"essential demand {obs.A_e} exceeds supply {obs.S} plus grid capacity {obs.g_max}"
        )
    s_e = min(obs.S, obs.A_e)
    s_s = min(obs.S - s_e, q)
    g_e = obs.A_e - s_e
    g_s = max(min(q - s_s, obs.g_max - g_e), 0.0)
    return Dispatch(g_e=g_e, g_s=g_s, s_e=s_e, s_s=s_s, s_p=0.0, curtailed=obs.S - s_e - s_s)


@dataclass
class RunSummary:
    policy: str
    seed: int
    trace_digest: str
    params: LyapunovParams
    records: list[SlotRecord] = field(repr=False)
    fifo: FifoReport = field(repr=False)
    terminal_penalty: float = 0.0

    @property
    def label(self) -> str:
        if self.policy == "bts_lo":
            return f"bts_lo(V={self.params.v:g},eps={self.params.epsilon:g})"
        return self.policy

    @property
    def slot_costs(self) -> np.ndarray:
        return np.array([r.cost for r in self.records])

    @property
    def cumulative_cost(self) -> np.ndarray:
        return np.cumsum(self.slot_costs)

    @property
    def total_cost(self) -> float:
        return math.fsum(r.cost for r in self.records)

    @property
    def queue_series(self) -> np.ndarray:
        """Q(t) at the start of each slot."""
        return np.array([r.queues_before.q for r in self.records])

    @property
    def time_average_q(self) -> float:
        return float(self.queue_series.mean())

    @property
    def terminal_backlog(self) -> float:
        return self.records[-1].queues.q

    @property
    def max_q(self) -> float:
        return max(max(r.queues_before.q, r.queues.q) for r in self.records)

    @property
    def max_z(self) -> float:
        return max(max(r.queues_before.z, r.queues.z) for r in self.records)

    @property
    def worst_delay(self) -> int:
        return self.fifo.worst

    @property
    def delay_bound_slots(self) -> int:
        return delay_bound(self.max_z, self.max_q, self.params.epsilon)

    def summary_dict(self) -> dict:
        return {
            "policy": self.policy,
            "label": self.label,
            "seed": self.seed,
            "trace_digest": self.trace_digest,
            "horizon": len(self.records),
            "v": self.params.v,
            "epsilon": self.params.epsilon,
            "total_cost": self.total_cost,
            "terminal_backlog": self.terminal_backlog,
            "terminal_penalty_cost": self.terminal_penalty * self.terminal_backlog,
            "time_average_q": self.time_average_q,
            "max_q": self.max_q,
            "max_z": self.max_z,
            "worst_delay": self.worst_delay,
            "delay_bound": self.delay_bound_slots,
            "units_served": len(self.fifo.delays),
            "units_pending": self.fifo.pending,
            "total_curtailed": math.fsum(r.dispatch.curtailed for r in self.records),
        }

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(LOG_COLUMNS)
            for rec in self.records:
                writer.writerow([repr(x) if isinstance(x, float) else x for x in rec.row()])

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.summary_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


Decider = Callable[[int, SlotObservation, QueueState], tuple[Dispatch, str]]


def simulate(trace: ScenarioTrace, decide: Decider, params: LyapunovParams) -> list[SlotRecord]:
    """Run a policy over the trace, checking balance identities every slot."""
    queues = QueueState()
    records = []
    for t, obs in enumerate(trace):
        try:
            d, label = decide(t, obs, queues)
        except InfeasibleDemandError as exc:
            raise InfeasibleDemandError(str(exc), slot=t) from None
        d.check(obs)
        nxt = update_queues(queues, d.served, obs.A_s, params.epsilon)
        records.append(SlotRecord(t, obs, d, queues, nxt, instantaneous_cost(d, obs), label))
        queues = nxt
    return records


def _lo_decider(params: LyapunovParams) -> Decider:
    def decide(t, obs, queues):
        return decide_slot(obs, queues, params), classify(obs, queues, params)
    return decide


def _pos_decider(t, obs, queues):
    return pos_policy(obs, queues.q), "POS"


def run_policy(
    config: ScenarioConfig,
    policy: str,
    trace: ScenarioTrace | None = None,
    params: LyapunovParams | None = None,
) -> RunSummary:
    """Simulate one policy; ``trace`` defaults to the scenario's seeded trace."""
    if policy not in POLICIES:
        raise ConfigurationError(f"unknown policy {policy!r}; expected one of {POLICIES}")
    trace = build_trace(config) if trace is None else trace
    params = config.lyapunov_params() if params is None else params
    penalty = 0.0
    if policy == "bts_lo":
        decide = _lo_decider(params)
    elif policy == "pos":
        decide = _pos_decider
    else:
        grid = config.dp_grid()
        _, dp_policy = solve_backward(trace.observations, grid, 0.0, config.dp_terminal_penalty)
        plan = rollout(dp_policy, trace.observations)
        penalty = plan.terminal_penalty

        def decide(t, obs, queues):
            return plan.dispatches[t], "DP"

    records = simulate(trace, decide, params)
    return RunSummary(policy, config.seed, trace.digest, params, records, fifo_delay_tracker(records), penalty)


@dataclass
class ComparisonReport:
    labels: list[str]
    cumulative_cost: dict[str, np.ndarray]
    log10_queue: dict[str, np.ndarray]
    differences: dict[str, np.ndarray]
    table: list[dict]

    def write_series_csv(self, path, seed: int | None = None) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            head = ["t"] + [f"cum_cost[{l}]" for l in self.labels] + [f"log10_Q[{l}]" for l in self.labels]
            if seed is not None:
                head = ["seed"] + head
            writer.writerow(head)
            T = len(next(iter(self.cumulative_cost.values())))
            for t in range(T):
                row = [t] + [repr(float(self.cumulative_cost[l][t])) for l in self.labels]
                row += [repr(float(self.log10_queue[l][t])) for l in self.labels]
                writer.writerow(([seed] if seed is not None else []) + row)


def compare_runs(summaries: Sequence[RunSummary]) -> ComparisonReport:
    """Align runs that share a seed and trace; the first run is the reference."""
    if not summaries:
        raise ComparisonError("nothing to compare")
    ref = summaries[0]
    for s in summaries[1:]:
        if s.trace_digest != ref.trace_digest or s.seed != ref.seed:
            raise ComparisonError(f"run {s.label} (seed {s.seed}) does not share the reference scenario")
    labels, cum, logq, diff, table = [], {}, {}, {}, []
    for s in summaries:
        label = s.label
        while label in cum:
            label += "'"
        labels.append(label)
        cum[label] = s.cumulative_cost
        logq[label] = np.log10(np.maximum(s.queue_series, 1.0))
        diff[label] = cum[label] - ref.cumulative_cost
        table.append({
            "label": label, "policy": s.policy, "v": s.params.v, "epsilon": s.params.epsilon,
            "total_cost": s.total_cost, "time_average_q": s.time_average_q,
            "worst_delay": s.worst_delay, "delay_bound": s.delay_bound_slots,
        })
    return ComparisonReport(labels, cum, logq, diff, table)


@dataclass(frozen=True)
class SweepRow:
    v: float
    epsilon: float
    seed: int
    total_cost: float
    time_average_q: float
    worst_delay: int
    delay_bound: int


def _sweep_one(args) -> SweepRow:
    config, v, eps, seed = args
    cfg = replace(config, seed=seed)
    s = run_policy(cfg, "bts_lo", params=LyapunovParams(v=v, epsilon=eps))
    return SweepRow(v, eps, seed, s.total_cost, s.time_average_q, s.worst_delay, s.delay_bound_slots)


def sweep(
    config: ScenarioConfig,
    v_values: Sequence[float],
    eps_values: Sequence[float | None],
    seeds: Sequence[int],
    jobs: int = 1,
) -> list[SweepRow]:
    """BTS-LO over the (V, epsilon, seed) cross product, sorted by that key.

    An epsilon of ``None`` stands for the scenario default.
    """
    default_eps = config.lyapunov_params().epsilon
    eps_values = [default_eps if e is None else e for e in eps_values]
    jobs_list = [(config, v, e, s) for v in v_values for e in eps_values for s in seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_one, jobs_list))
    else:
        rows = [_sweep_one(j) for j in jobs_list]
    return sorted(rows, key=lambda r: (r.v, r.epsilon, r.seed))


# Module data for the default scenario: the three appliance kinds with quoted daily energies are
# cycled to fill 20 essential and 20 shiftable slots per home.
_ESSENTIAL_KINDS = (("stove_regular", 2.01), ("stove_self_cleaning", 1.89), ("lighting_10_bulbs", 1.00))
_SHIFTABLE_KINDS = (
    ("dishwasher", 1.44), ("washer_energy_star", 1.49), ("washer_regular", 1.94), ("clothes_dryer", 2.50),
)
_ESSENTIAL_WINDOWS = (
    frozenset(range(24)),
    frozenset(range(6, 10)),
    frozenset(range(11, 15)),
    frozenset(range(17, 23)),
)


def reference_appliances() -> tuple[tuple[Appliance, ...], tuple[Appliance, ...]]:
    essential = tuple(
        Appliance(f"{name}_{i}", "essential", kwh, _ESSENTIAL_WINDOWS[i % len(_ESSENTIAL_WINDOWS)])
        for i, (name, kwh) in ((i, _ESSENTIAL_KINDS[i % 3]) for i in range(20))
    )
    shiftable = tuple(
        Appliance(f"{name}_{i}", "shiftable", kwh)
        for i, (name, kwh) in ((i, _SHIFTABLE_KINDS[i % 4]) for i in range(20))
    )
    return essential, shiftable


REFERENCE_PV = renewgen.PvPanelSpec(
    ambient_temp_C=25.0,
    nominal_op_temp_C=43.0,
    volt_temp_coeff_V_per_C=0.0144,
    curr_temp_coeff_A_per_C=0.00122,
    short_circuit_current_A=5.32,
    open_circuit_voltage_V=21.98,
    mpp_current_A=4.76,
    mpp_voltage_V=17.32,
    module_count=250,
)
REFERENCE_TURBINE = renewgen.WindTurbineSpec(4.0, 14.0, 25.0, 20.0)


def reference_scenario(seed: int = 0, horizon: int = 168, **overrides) -> ScenarioConfig:
    """Ten homes, 20 + 20 appliances, day/night two-tier prices, shared PV + wind plant."""
    essential, shiftable = reference_appliances()
    generation = GenerationConfig(
        solar=renewgen.SolarModel(2.0, 2.5),
        wind=renewgen.WindModel(6.0),
        pv=REFERENCE_PV,
        turbine=REFERENCE_TURBINE,
    )
    base = dict(
        n_households=10,
        horizon=horizon,
        seed=seed,
        g_max=80.0,
        s_max=40.0,
        prices=REFERENCE_PRICES,
        generation=generation,
        essential=essential,
        shiftable=shiftable,
    )
    base.update(overrides)
    return ScenarioConfig(**base)
