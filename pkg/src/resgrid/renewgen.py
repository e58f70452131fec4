"""Mixed PV + wind generation model.

Solar irradiance follows a Beta distribution and wind speed a Rayleigh
distribution. Both are cut into discrete states, each state is mapped to an
output power through the device models, and the two marginals are combined
into a joint table of (power, probability) pairs that drives the per-slot
renewable supply S(t).

Note on the irradiance density: the standard Beta exponent ``s**(alpha - 1)``
is used. The variant ``s**(alpha + 1)`` sometimes printed alongside the
standard normaliser does not integrate to one.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Literal, Sequence

import numpy as np

from resgrid.errors import ConfigurationError, DomainError

SupplyMode = Literal["expected", "sampled"]

RAYLEIGH_SCALE_FACTOR = 1.128
_PARTITION_TOL = 1e-12


@dataclass(frozen=True)
class PvPanelSpec:
    """Electrical and thermal characteristics of one PV module type.

    Attributes:
        ambient_temp_C: Ambient temperature of the site.
        nominal_op_temp_C: Nominal operating cell temperature.
        volt_temp_coeff_V_per_C: Open-circuit voltage drop per degree of cell temperature.
        curr_temp_coeff_A_per_C: Short-circuit current gain per degree above 25 C.
        short_circuit_current_A: I_sc.
        open_circuit_voltage_V: V_oc.
        mpp_current_A: Current at the maximum power point.
        mpp_voltage_V: Voltage at the maximum power point.
        module_count: Number of identical modules in the array.
    """

    ambient_temp_C: float
    nominal_op_temp_C: float
    volt_temp_coeff_V_per_C: float
    curr_temp_coeff_A_per_C: float
    short_circuit_current_A: float
    open_circuit_voltage_V: float
    mpp_current_A: float
    mpp_voltage_V: float
    module_count: int = 1

    def __post_init__(self) -> None:
        electrical = (
            self.short_circuit_current_A,
            self.open_circuit_voltage_V,
            self.mpp_current_A,
            self.mpp_voltage_V,
        )
        if not all(x > 0 for x in electrical):
            raise ConfigurationError("PV electrical parameters must be positive")
        if self.mpp_current_A > self.short_circuit_current_A:
            raise ConfigurationError("mpp_current_A must not exceed short_circuit_current_A")
        if self.mpp_voltage_V > self.open_circuit_voltage_V:
            raise ConfigurationError("mpp_voltage_V must not exceed open_circuit_voltage_V")
        if int(self.module_count) != self.module_count or self.module_count < 1:
            raise ConfigurationError("module_count must be a positive integer")

    @property
    def fill_factor(self) -> float:
        return (self.mpp_voltage_V * self.mpp_current_A) / (
            self.open_circuit_voltage_V * self.short_circuit_current_A
        )


@dataclass(frozen=True)
class SolarModel:
    alpha: float
    beta: float

    def __post_init__(self) -> None:
        if not (self.alpha > 0 and self.beta > 0):
            raise ConfigurationError("Beta shape parameters must be positive")


@dataclass(frozen=True)
class WindTurbineSpec:
    cut_in_speed_mps: float
    rated_speed_mps: float
    cut_off_speed_mps: float
    rated_power_kW: float

    def __post_init__(self) -> None:
        if not (0 <= self.cut_in_speed_mps < self.rated_speed_mps < self.cut_off_speed_mps):
            raise ConfigurationError("turbine speeds must satisfy 0 <= v_ci < v_r < v_co")
        if not self.rated_power_kW > 0:
            raise ConfigurationError("rated_power_kW must be positive")


@dataclass(frozen=True)
class WindModel:
    mean_speed_mps: float

    def __post_init__(self) -> None:
        if not self.mean_speed_mps > 0:
            raise ConfigurationError("mean_speed_mps must be positive")

    @property
    def scale(self) -> float:
        """Rayleigh scale ``c = 1.128 * v_m``."""
        return RAYLEIGH_SCALE_FACTOR * self.mean_speed_mps


@dataclass(frozen=True)
class GenerationStateTable:
    """Joint solar/wind states with output power (kW) and probability."""

    powers_kW: tuple[float, ...]
    probabilities: tuple[float, ...]
    s_max_kW: float

    def __post_init__(self) -> None:
        if len(self.powers_kW) != len(self.probabilities) or not self.powers_kW:
            raise ConfigurationError("state table needs matching, nonempty power/probability lists")
        if any(p < 0 for p in self.powers_kW) or any(w < 0 for w in self.probabilities):
            raise ConfigurationError("state powers and probabilities must be nonnegative")
        if abs(math.fsum(self.probabilities) - 1.0) > 1e-6:
            raise ConfigurationError("state probabilities must sum to 1")
        if self.s_max_kW < 0:
            raise ConfigurationError("s_max_kW must be nonnegative")

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[float, float]], s_max_kW: float) -> "GenerationStateTable":
        powers, probs = zip(*pairs)
        return cls(tuple(float(p) for p in powers), tuple(float(w) for w in probs), float(s_max_kW))

    def __len__(self) -> int:
        return len(self.powers_kW)

    @property
    def states(self) -> list[tuple[float, float]]:
        return list(zip(self.powers_kW, self.probabilities))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["state_index", "power_kW", "probability"])
            for i, (p, w) in enumerate(self.states):
                writer.writerow([i, repr(p), repr(w)])


def beta_pdf(s: float, model: SolarModel) -> float:
    """Beta density of the irradiance fraction ``s``; zero outside (0, 1)."""
    if not math.isfinite(s):
        raise DomainError(f"irradiance must be finite, got {s!r}")
    if s <= 0.0 or s >= 1.0:
        return 0.0
    a, b = model.alpha, model.beta
    log_norm = math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
    return math.exp(log_norm + (a - 1.0) * math.log(s) + (b - 1.0) * math.log1p(-s))


def adaptive_simpson(f, a: float, b: float, tol: float = 1e-8, max_depth: int = 60) -> float:
    """Integrate ``f`` over [a, b] with absolute tolerance ``tol``."""
    if b == a:
        return 0.0
    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    total = 0.0
    stack = [(a, b, fa, fm, fb, whole, tol, 0)]
    while stack:
        lo, hi, flo, fmid, fhi, est, eps, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        lm, rm = 0.5 * (lo + mid), 0.5 * (mid + hi)
        flm, frm = f(lm), f(rm)
        left = (mid - lo) / 6.0 * (flo + 4.0 * flm + fmid)
        right = (hi - mid) / 6.0 * (fmid + 4.0 * frm + fhi)
        delta = left + right - est
        if depth >= max_depth or abs(delta) <= 15.0 * eps:
            total += left + right + delta / 15.0
        else:
            stack.append((lo, mid, flo, flm, fmid, left, 0.5 * eps, depth + 1))
            stack.append((mid, hi, fmid, frm, fhi, right, 0.5 * eps, depth + 1))
    return total


def _beta_mass_lower(s1: float, s2: float, model: SolarModel, tol: float) -> float:
    # On [s1, s2] within [0, 0.5]. For alpha < 1 substitute s = t**(1/alpha),
    # which cancels the s**(alpha-1) singularity at 0.
    a, b = model.alpha, model.beta
    norm = math.exp(math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b))
    if a >= 1.0:

        def density(s: float) -> float:
            # closed at s = 0 so the endpoint sample is the one-sided limit
            if s <= 0.0:
                return norm if a == 1.0 else 0.0
            return norm * s ** (a - 1.0) * (1.0 - s) ** (b - 1.0)

        return adaptive_simpson(density, s1, s2, tol)
    c = norm / a

    def g(t: float) -> float:
        s = t ** (1.0 / a)
        return c * (1.0 - s) ** (b - 1.0)

    return adaptive_simpson(g, s1**a, s2**a, tol)


def solar_state_prob(s1: float, s2: float, model: SolarModel, tol: float = 1e-8) -> float:
    """Probability that the irradiance fraction falls in [s1, s2]."""
    if not (math.isfinite(s1) and math.isfinite(s2)):
        raise DomainError("irradiance bounds must be finite")
    if s1 > s2:
        raise DomainError(f"lower bound {s1} exceeds upper bound {s2}")
    lo, hi = max(s1, 0.0), min(s2, 1.0)
    if hi <= lo:
        return 0.0
    total = 0.0
    if lo < 0.5:
        total += _beta_mass_lower(lo, min(hi, 0.5), model, 0.5 * tol)
    if hi > 0.5:
        # mirror: s -> 1 - s swaps the shape parameters
        mirrored = SolarModel(model.beta, model.alpha)
        total += _beta_mass_lower(1.0 - hi, 1.0 - max(lo, 0.5), mirrored, 0.5 * tol)
    return total


def rayleigh_state_prob(v1: float, v2: float, model: WindModel) -> float:
    """Probability that wind speed falls in [v1, v2]; ``v2`` may be ``inf``."""
    if v1 > v2:
        raise DomainError(f"lower bound {v1} exceeds upper bound {v2}")
    if v1 < 0:
        raise DomainError("wind speeds must be nonnegative")
    c = model.scale
    upper = 0.0 if math.isinf(v2) else math.exp(-((v2 / c) ** 2))
    return math.exp(-((v1 / c) ** 2)) - upper


def pv_output_power(s_ay: float, spec: PvPanelSpec) -> float:
    """Array output in kW for average irradiance ``s_ay`` (kW/m^2)."""
    if s_ay < 0:
        raise DomainError("irradiance must be nonnegative")
    cell_temp = spec.ambient_temp_C + s_ay * (spec.nominal_op_temp_C - 20.0) / 0.8
    current = s_ay * (spec.short_circuit_current_A + spec.curr_temp_coeff_A_per_C * (cell_temp - 25.0))
    voltage = spec.open_circuit_voltage_V - spec.volt_temp_coeff_V_per_C * cell_temp
    watts = spec.module_count * spec.fill_factor * voltage * current
    return max(watts / 1000.0, 0.0)


def wind_output_power(v_aw: float, spec: WindTurbineSpec) -> float:
    """Piecewise-linear turbine power curve in kW."""
    if v_aw < spec.cut_in_speed_mps or v_aw > spec.cut_off_speed_mps:
        return 0.0
    if v_aw >= spec.rated_speed_mps:
        return spec.rated_power_kW
    ramp = (v_aw - spec.cut_in_speed_mps) / (spec.rated_speed_mps - spec.cut_in_speed_mps)
    return spec.rated_power_kW * ramp


def intervals_from_edges(edges: Sequence[float], open_ended: bool = False) -> list[tuple[float, float]]:
    """Turn sorted edges into consecutive intervals, optionally closing with [last, inf)."""
    edges = [float(e) for e in edges]
    out = list(zip(edges[:-1], edges[1:]))
    if open_ended:
        out.append((edges[-1], math.inf))
    return out


def _check_partition(bounds: Sequence[tuple[float, float]], start: float, end: float | None, what: str) -> None:
    if not bounds:
        raise ConfigurationError(f"{what} bounds are empty")
    if abs(bounds[0][0] - start) > _PARTITION_TOL:
        raise ConfigurationError(f"{what} bounds must start at {start}")
    for (lo, hi), (nlo, _) in zip(bounds, bounds[1:]):
        if abs(hi - nlo) > _PARTITION_TOL:
            raise ConfigurationError(f"{what} bounds are not contiguous at {hi}")
    for lo, hi in bounds:
        if not hi > lo:
            raise ConfigurationError(f"{what} interval [{lo}, {hi}] is empty or reversed")
    last = bounds[-1][1]
    if end is None:
        if not math.isinf(last):
            raise ConfigurationError(f"last {what} interval must be open to infinity")
    elif abs(last - end) > _PARTITION_TOL:
        raise ConfigurationError(f"{what} bounds must end at {end}")


def build_state_table(
    solar_bounds: Sequence[tuple[float, float]],
    wind_bounds: Sequence[tuple[float, float]],
    solar: SolarModel,
    wind: WindModel,
    pv: PvPanelSpec,
    turbine: WindTurbineSpec,
    s_max: float,
) -> GenerationStateTable:
    """Combine solar and wind states into one joint table.

    States are ordered solar-major: index ``y * len(wind_bounds) + w``. Each
    state's power is the sum of the device outputs at the interval midpoints;
    the open final wind interval is represented by a speed beyond cut-off.
    """
    _check_partition(solar_bounds, 0.0, 1.0, "solar")
    _check_partition(wind_bounds, 0.0, None, "wind")

    solar_probs = [solar_state_prob(lo, hi, solar) for lo, hi in solar_bounds]
    wind_probs = [rayleigh_state_prob(lo, hi, wind) for lo, hi in wind_bounds]
    solar_powers = [pv_output_power(0.5 * (lo + hi), pv) for lo, hi in solar_bounds]
    tail_speed = max(wind_bounds[-1][0], turbine.cut_off_speed_mps) + 1.0
    wind_powers = [
        wind_output_power(tail_speed if math.isinf(hi) else 0.5 * (lo + hi), turbine)
        for lo, hi in wind_bounds
    ]

    probs = np.outer(solar_probs, wind_probs).ravel()
    probs = np.clip(probs, 0.0, None)
    probs /= probs.sum()
    powers = np.add.outer(solar_powers, wind_powers).ravel()
    return GenerationStateTable(tuple(powers.tolist()), tuple(probs.tolist()), float(s_max))


def expected_supply(table: GenerationStateTable) -> float:
    mean = math.fsum(p * w for p, w in table.states)
    return min(max(mean, 0.0), table.s_max_kW)


def supply(t: int, table: GenerationStateTable, mode: SupplyMode = "sampled", rng: np.random.Generator | None = None) -> float:
    """Renewable supply S(t) in kW for slot ``t`` (the model is stationary in t)."""
    if mode == "expected":
        return expected_supply(table)
    if mode != "sampled":
        raise ConfigurationError(f"unknown supply mode {mode!r}")
    if rng is None:
        raise ConfigurationError("sampled supply needs a random generator")
    cdf = np.cumsum(table.probabilities)
    idx = min(int(np.searchsorted(cdf, rng.random(), side="right")), len(table) - 1)
    return min(table.powers_kW[idx], table.s_max_kW)


def supply_trace(T: int, table: GenerationStateTable, mode: SupplyMode = "sampled", rng: np.random.Generator | None = None) -> np.ndarray:
    """Vectorised ``supply`` over slots 0..T-1; same draws as T scalar calls."""
    if mode == "expected":
        return np.full(T, expected_supply(table))
    if mode != "sampled":
        raise ConfigurationError(f"unknown supply mode {mode!r}")
    if rng is None:
        raise ConfigurationError("sampled supply needs a random generator")
    cdf = np.cumsum(table.probabilities)
    idx = np.minimum(np.searchsorted(cdf, rng.random(T), side="right"), len(table) - 1)
    return np.minimum(np.asarray(table.powers_kW)[idx], table.s_max_kW)
