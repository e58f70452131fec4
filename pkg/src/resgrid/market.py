"""Two-tier tariffs, appliance sets, and aggregate household demand."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from resgrid.errors import ConfigurationError

SLOTS_PER_DAY = 24
ALL_HOURS = frozenset(range(SLOTS_PER_DAY))


@dataclass(frozen=True)
class PriceSchedule:
    """Day/night buy and sell prices in cents/kWh.

    Daytime is the half-open hour window ``[day_start_hour, day_end_hour)``.
    With ``rational`` set, the buy price may never be undercut by the sell
    price, which rules out buy-to-resell arbitrage.
    """

    day_buy: float
    night_buy: float
    day_sell: float
    night_sell: float
    day_start_hour: int = 8
    day_end_hour: int = 24
    rational: bool = True

    def __post_init__(self) -> None:
        if min(self.day_buy, self.night_buy, self.day_sell, self.night_sell) < 0:
            raise ConfigurationError("prices must be nonnegative")
        if not 0 <= self.day_start_hour <= self.day_end_hour <= SLOTS_PER_DAY:
            raise ConfigurationError("day window must satisfy 0 <= start <= end <= 24")
        if self.rational and (self.day_buy < self.day_sell or self.night_buy < self.night_sell):
            raise ConfigurationError("rational pricing requires buy price >= sell price")

    @property
    def max_buy(self) -> float:
        return max(self.day_buy, self.night_buy)

    def is_day(self, t: int) -> bool:
        return self.day_start_hour <= t % SLOTS_PER_DAY < self.day_end_hour


REFERENCE_PRICES = PriceSchedule(day_buy=0.3, night_buy=0.1, day_sell=0.2, night_sell=0.1)


def price_at(t: int, schedule: PriceSchedule) -> tuple[float, float]:
    """Return ``(p, gamma)`` for slot ``t`` (one-hour slots, hour = t mod 24)."""
    if t < 0:
        raise ValueError("slot index must be nonnegative")
    if schedule.is_day(t):
        return schedule.day_buy, schedule.day_sell
    return schedule.night_buy, schedule.night_sell


@dataclass(frozen=True)
class Appliance:
    name: str
    kind: Literal["essential", "shiftable"]
    daily_energy_kWh: float
    active_hours: frozenset[int] = ALL_HOURS

    def __post_init__(self) -> None:
        if self.kind not in ("essential", "shiftable"):
            raise ConfigurationError(f"appliance {self.name!r}: unknown kind {self.kind!r}")
        if self.daily_energy_kWh < 0:
            raise ConfigurationError(f"appliance {self.name!r}: negative daily energy")
        hours = frozenset(self.active_hours)
        if not hours:
            raise ConfigurationError(f"appliance {self.name!r}: active_hours is empty")
        if not hours <= ALL_HOURS:
            raise ConfigurationError(f"appliance {self.name!r}: active hours must lie in 0..23")
        object.__setattr__(self, "active_hours", hours)


@dataclass(frozen=True)
class Household:
    id: int
    appliances: tuple[Appliance, ...] = ()
    a_s_max: int = 0

    def __post_init__(self) -> None:
        if int(self.a_s_max) != self.a_s_max or self.a_s_max < 0:
            raise ConfigurationError(f"household {self.id}: a_s_max must be a nonnegative integer")
        object.__setattr__(self, "appliances", tuple(self.appliances))

    def of_kind(self, kind: str) -> list[Appliance]:
        return [a for a in self.appliances if a.kind == kind]


@dataclass(frozen=True)
class DemandTrace:
    """Per-slot aggregate essential and shiftable demand in kWh."""

    essential: np.ndarray
    shiftable: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        if self.essential.shape != self.shiftable.shape or self.essential.ndim != 1:
            raise ConfigurationError("demand series must be 1-D and of equal length")
        if (self.essential < 0).any() or (self.shiftable < 0).any():
            raise ConfigurationError("demand must be nonnegative")

    @property
    def horizon(self) -> int:
        return len(self.essential)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["slot", "A_e", "A_s"])
            for t, (ae, ash) in enumerate(zip(self.essential.tolist(), self.shiftable.tolist())):
                writer.writerow([t, repr(ae), repr(ash)])


def essential_profile(households: Sequence[Household], T: int) -> np.ndarray:
    """Aggregate essential load A_e(t), each appliance spread evenly over its hours."""
    if T < 1:
        raise ValueError("horizon must be at least one slot")
    day = np.zeros(SLOTS_PER_DAY)
    for house in households:
        for app in house.of_kind("essential"):
            share = app.daily_energy_kWh / len(app.active_hours)
            for h in app.active_hours:
                day[h] += share
    return day[np.arange(T) % SLOTS_PER_DAY]


def shiftable_arrivals(households: Sequence[Household], T: int, rng: np.random.Generator) -> np.ndarray:
    """Aggregate shiftable arrivals A_s(t): per household an integer uniform on 0..a_s_max."""
    if T < 1:
        raise ValueError("horizon must be at least one slot")
    highs = np.array([h.a_s_max for h in households], dtype=np.int64)
    if highs.size == 0:
        return np.zeros(T)
    draws = rng.integers(0, highs + 1, size=(T, highs.size))
    return draws.sum(axis=1).astype(float)


def mean_arrival_rate(households: Sequence[Household]) -> float:
    """E[A_s(t)] for the uniform-integer arrival model."""
    return sum(h.a_s_max for h in households) / 2.0


def arrival_cap_from_appliances(shiftable: Sequence[Appliance]) -> int:
    """Pick a_s_max so the mean hourly arrival matches the shiftable daily energy."""
    daily = sum(a.daily_energy_kWh for a in shiftable)
    return int(round(2.0 * daily / SLOTS_PER_DAY))
