"""YAML scenario files: schema, validation and conversion to ``ScenarioConfig``."""

from __future__ import annotations

from pathlib import Path
from typing import Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from resgrid import renewgen
from resgrid.errors import ConfigurationError
from resgrid.market import Appliance, PriceSchedule
from resgrid.simkit import POLICIES, GenerationConfig, ScenarioConfig

SCHEMA_VERSION = 1


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class PricesModel(_Strict):
    day_buy: float = Field(ge=0)
    night_buy: float = Field(ge=0)
    day_sell: float = Field(ge=0)
    night_sell: float = Field(ge=0)
    day_start_hour: int = Field(8, ge=0, le=24)
    day_end_hour: int = Field(24, ge=0, le=24)
    rational: bool = True

    @model_validator(mode="after")
    def _rational(self):
        if self.rational and (self.day_buy < self.day_sell or self.night_buy < self.night_sell):
            raise ValueError("rational pricing requires buy price >= sell price (set rational: false to allow)")
        if self.day_start_hour > self.day_end_hour:
            raise ValueError("day_start_hour must not exceed day_end_hour")
        return self


class SolarModelModel(_Strict):
    alpha: float = Field(gt=0)
    beta: float = Field(gt=0)


class WindModelModel(_Strict):
    mean_speed_mps: float = Field(gt=0)


class PvModel(_Strict):
    ambient_temp_C: float
    nominal_op_temp_C: float
    volt_temp_coeff_V_per_C: float
    curr_temp_coeff_A_per_C: float
    short_circuit_current_A: float = Field(gt=0)
    open_circuit_voltage_V: float = Field(gt=0)
    mpp_current_A: float = Field(gt=0)
    mpp_voltage_V: float = Field(gt=0)
    module_count: int = Field(1, ge=1)


class TurbineModel(_Strict):
    cut_in_speed_mps: float = Field(ge=0)
    rated_speed_mps: float = Field(gt=0)
    cut_off_speed_mps: float = Field(gt=0)
    rated_power_kW: float = Field(gt=0)


class GenerationModel(_Strict):
    solar: SolarModelModel
    wind: WindModelModel
    pv: PvModel
    turbine: TurbineModel
    solar_edges: list[float] = Field(default_factory=lambda: [i / 20 for i in range(21)])
    wind_edges: list[float] = Field(default_factory=lambda: [float(v) for v in range(26)])


class ApplianceModel(_Strict):
    name: str
    daily_energy_kWh: float = Field(ge=0)
    active_hours: list[int] = Field(default_factory=lambda: list(range(24)))

    @field_validator("active_hours")
    @classmethod
    def _hours(cls, v: list[int]) -> list[int]:
        if not v:
            raise ValueError("active_hours must be nonempty")
        if any(h < 0 or h > 23 for h in v):
            raise ValueError("active hours must lie in 0..23")
        return sorted(set(v))


class DpModel(_Strict):
    q_step: float = Field(0.25, gt=0)
    u_step: float = Field(0.25, gt=0)
    q_max: Optional[float] = Field(None, gt=0)
    terminal_penalty: Optional[float] = Field(None, ge=0)


class ScenarioModel(_Strict):
    n_households: int = Field(ge=1)
    horizon: int = Field(ge=1)
    seed: int = Field(0, ge=0)
    g_max: float = Field(gt=0)
    s_max: float = Field(ge=0)
    supply_mode: Literal["expected", "sampled"] = "sampled"
    v: float = Field(10.0, gt=0)
    epsilon: Optional[float] = Field(None, gt=0)
    a_s_max: Optional[int] = Field(None, ge=0)
    prices: PricesModel
    generation: GenerationModel
    essential: list[ApplianceModel] = Field(default_factory=list)
    shiftable: list[ApplianceModel] = Field(default_factory=list)
    dp: DpModel = Field(default_factory=DpModel)


class SweepModel(_Strict):
    v: list[float] = Field(default_factory=lambda: [1.0, 10.0, 100.0])
    epsilon: list[Optional[float]] = Field(default_factory=lambda: [None])
    seeds: list[int] = Field(default_factory=lambda: [0])

    @field_validator("v")
    @classmethod
    def _positive_v(cls, v):
        if not v or any(x <= 0 for x in v):
            raise ValueError("sweep v values must be a nonempty list of positive numbers")
        return v

    @field_validator("epsilon")
    @classmethod
    def _positive_eps(cls, v):
        if not v or any(x is not None and x <= 0 for x in v):
            raise ValueError("sweep epsilon values must be a nonempty list of positive numbers or null")
        return v

    @field_validator("seeds")
    @classmethod
    def _seeds(cls, v):
        if not v:
            raise ValueError("sweep seeds must be nonempty")
        return v


class OutputModel(_Strict):
    out_dir: str = "out"


class ConfigFile(_Strict):
    schema_version: Literal[1]
    scenario: ScenarioModel
    policies: list[Literal["bts_dp", "bts_lo", "pos"]] = Field(default_factory=lambda: list(POLICIES))
    seeds: list[int] = Field(default_factory=lambda: [0])
    sweep: SweepModel = Field(default_factory=SweepModel)
    output: OutputModel = Field(default_factory=OutputModel)

    def to_scenario(self, seed: int | None = None) -> ScenarioConfig:
        sc = self.scenario
        g = sc.generation
        generation = GenerationConfig(
            solar=renewgen.SolarModel(**g.solar.model_dump()),
            wind=renewgen.WindModel(**g.wind.model_dump()),
            pv=renewgen.PvPanelSpec(**g.pv.model_dump()),
            turbine=renewgen.WindTurbineSpec(**g.turbine.model_dump()),
            solar_edges=tuple(g.solar_edges),
            wind_edges=tuple(g.wind_edges),
        )

        def apps(items, kind):
            return tuple(Appliance(a.name, kind, a.daily_energy_kWh, frozenset(a.active_hours)) for a in items)

        return ScenarioConfig(
            n_households=sc.n_households,
            horizon=sc.horizon,
            seed=sc.seed if seed is None else seed,
            g_max=sc.g_max,
            s_max=sc.s_max,
            prices=PriceSchedule(**sc.prices.model_dump()),
            generation=generation,
            essential=apps(sc.essential, "essential"),
            shiftable=apps(sc.shiftable, "shiftable"),
            a_s_max=sc.a_s_max,
            v=sc.v,
            epsilon=sc.epsilon,
            supply_mode=sc.supply_mode,
            dp_q_step=sc.dp.q_step,
            dp_u_step=sc.dp.u_step,
            dp_q_max=sc.dp.q_max,
            dp_terminal_penalty=sc.dp.terminal_penalty,
        )


def parse_config(data: dict) -> ConfigFile:
    return ConfigFile.model_validate(data)


def load_config(path: str | Path, overrides: dict | None = None) -> ConfigFile:
    """Read and validate a YAML file; ``overrides`` patch ``scenario`` keys first."""
    with open(path) as fh:
        data = yaml.safe_load(fh)
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path}: top level must be a mapping")
    if overrides:
        data.setdefault("scenario", {}).update(overrides)
    return parse_config(data)


def dump_config(cfg: ConfigFile) -> str:
    return yaml.safe_dump(cfg.model_dump(mode="json"), sort_keys=False, default_flow_style=None, width=100)


def scenario_to_file(config: ScenarioConfig, **extra) -> ConfigFile:
    """Inverse of ``ConfigFile.to_scenario``, for writing scenarios built in code."""
    gen = config.generation

    def apps(items):
        return [
            {"name": a.name, "daily_energy_kWh": a.daily_energy_kWh, "active_hours": sorted(a.active_hours)}
            for a in items
        ]

    prices = config.prices
    data = {
        "schema_version": SCHEMA_VERSION,
        "scenario": {
            "n_households": config.n_households,
            "horizon": config.horizon,
            "seed": config.seed,
            "g_max": config.g_max,
            "s_max": config.s_max,
            "supply_mode": config.supply_mode,
            "v": config.v,
            "epsilon": config.epsilon,
            "a_s_max": config.a_s_max,
            "prices": {
                "day_buy": prices.day_buy, "night_buy": prices.night_buy,
                "day_sell": prices.day_sell, "night_sell": prices.night_sell,
                "day_start_hour": prices.day_start_hour, "day_end_hour": prices.day_end_hour,
                "rational": prices.rational,
            },
            "generation": {
                "solar": {"alpha": gen.solar.alpha, "beta": gen.solar.beta},
                "wind": {"mean_speed_mps": gen.wind.mean_speed_mps},
                "pv": {k: getattr(gen.pv, k) for k in PvModel.model_fields},
                "turbine": {k: getattr(gen.turbine, k) for k in TurbineModel.model_fields},
                "solar_edges": list(gen.solar_edges),
                "wind_edges": list(gen.wind_edges),
            },
            "essential": apps(config.essential),
            "shiftable": apps(config.shiftable),
            "dp": {
                "q_step": config.dp_q_step, "u_step": config.dp_u_step,
                "q_max": config.dp_q_max, "terminal_penalty": config.dp_terminal_penalty,
            },
        },
    }
    data.update(extra)
    return parse_config(data)
