import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate
from scipy.stats import beta as beta_dist

from resgrid.errors import ConfigurationError, DomainError
from resgrid.renewgen import (
    GenerationStateTable,
    PvPanelSpec,
    SolarModel,
    WindModel,
    WindTurbineSpec,
    beta_pdf,
    build_state_table,
    intervals_from_edges,
    pv_output_power,
    rayleigh_state_prob,
    solar_state_prob,
    supply,
    supply_trace,
    wind_output_power,
)

PV = PvPanelSpec(
    ambient_temp_C=25.0,
    nominal_op_temp_C=43.0,
    volt_temp_coeff_V_per_C=0.0144,
    curr_temp_coeff_A_per_C=0.00122,
    short_circuit_current_A=5.32,
    open_circuit_voltage_V=21.98,
    mpp_current_A=4.76,
    mpp_voltage_V=17.32,
    module_count=10,
)
TURBINE = WindTurbineSpec(4.0, 14.0, 25.0, 1.0)


class TestBetaPdf:
    def test_outside_support_is_zero(self):
        assert beta_pdf(1.5, SolarModel(2, 3)) == 0.0
        assert beta_pdf(-0.1, SolarModel(2, 3)) == 0.0

    def test_uniform(self):
        assert beta_pdf(0.5, SolarModel(1, 1)) == pytest.approx(1.0, abs=1e-14)

    def test_beta22_midpoint(self):
        # Gamma(4)/(Gamma(2)Gamma(2)) * 0.5 * 0.5 = 6 * 0.25
        assert beta_pdf(0.5, SolarModel(2, 2)) == pytest.approx(1.5, abs=1e-14)

    @pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
    def test_non_finite_rejected(self, bad):
        with pytest.raises(DomainError):
            beta_pdf(bad, SolarModel(2, 2))

    @pytest.mark.parametrize("a,b,s", [(0.5, 0.5, 0.1), (2.0, 2.5, 0.3), (5.0, 1.2, 0.9)])
    def test_matches_scipy(self, a, b, s):
        assert beta_pdf(s, SolarModel(a, b)) == pytest.approx(beta_dist.pdf(s, a, b), rel=1e-12)

    def test_invalid_shape(self):
        with pytest.raises(ConfigurationError):
            SolarModel(0.0, 1.0)


class TestSolarStateProb:
    @pytest.mark.parametrize("a,b", [(1, 1), (2, 2), (0.4, 0.6), (3.5, 0.8), (0.5, 0.5), (2.0, 2.5)])
    def test_total_probability(self, a, b):
        assert solar_state_prob(0.0, 1.0, SolarModel(a, b)) == pytest.approx(1.0, abs=1e-8)

    def test_uniform_interval(self):
        assert solar_state_prob(0.0, 0.3, SolarModel(1, 1)) == pytest.approx(0.3, abs=1e-12)

    def test_beta22_half(self):
        assert solar_state_prob(0.0, 0.5, SolarModel(2, 2)) == pytest.approx(0.5, abs=1e-12)

    def test_reversed_bounds(self):
        with pytest.raises(DomainError):
            solar_state_prob(0.6, 0.2, SolarModel(2, 2))

    @settings(max_examples=60, deadline=None)
    @given(
        a=st.floats(0.3, 8.0),
        b=st.floats(0.3, 8.0),
        s1=st.floats(0.0, 1.0),
        s2=st.floats(0.0, 1.0),
    )
    def test_matches_cdf_and_finer_quadrature(self, a, b, s1, s2):
        lo, hi = sorted((s1, s2))
        model = SolarModel(a, b)
        got = solar_state_prob(lo, hi, model)
        exact = beta_dist.cdf(hi, a, b) - beta_dist.cdf(lo, a, b)
        assert got == pytest.approx(exact, abs=1e-8)
        assert got == pytest.approx(solar_state_prob(lo, hi, model, tol=1e-9), abs=1e-7)

    @settings(max_examples=40, deadline=None)
    @given(a=st.floats(0.3, 6.0), b=st.floats(0.3, 6.0), n=st.integers(1, 30))
    def test_partition_sums_to_one(self, a, b, n):
        bounds = intervals_from_edges(np.linspace(0, 1, n + 1))
        total = sum(solar_state_prob(lo, hi, SolarModel(a, b)) for lo, hi in bounds)
        assert total == pytest.approx(1.0, abs=1e-6)


class TestRayleigh:
    def test_zero_width(self):
        assert rayleigh_state_prob(3.0, 3.0, WindModel(6.0)) == 0.0

    def test_total(self):
        assert rayleigh_state_prob(0.0, math.inf, WindModel(6.0)) == pytest.approx(1.0, abs=1e-15)

    def test_unit_scale(self):
        model = WindModel(1 / 1.128)
        assert model.scale == pytest.approx(1.0)
        assert rayleigh_state_prob(0.0, 1.0, model) == pytest.approx(1 - math.exp(-1), abs=1e-12)
        assert rayleigh_state_prob(0.0, 1.0, model) == pytest.approx(0.632121, abs=1e-6)

    def test_reversed(self):
        with pytest.raises(DomainError):
            rayleigh_state_prob(5.0, 1.0, WindModel(6.0))

    @pytest.mark.parametrize("v1,v2", [(0.0, 3.0), (2.5, 7.0), (10.0, 25.0)])
    def test_matches_pdf_quadrature(self, v1, v2):
        c = WindModel(6.0).scale
        pdf = lambda v: (2 * v / c**2) * math.exp(-((v / c) ** 2))
        want, _ = integrate.quad(pdf, v1, v2, epsabs=1e-13)
        assert rayleigh_state_prob(v1, v2, WindModel(6.0)) == pytest.approx(want, abs=1e-11)

    @settings(max_examples=50, deadline=None)
    @given(vm=st.floats(0.5, 20.0), edges=st.lists(st.floats(0.01, 60.0), min_size=0, max_size=30))
    def test_partition_sums_to_one(self, vm, edges):
        inner = sorted(set(edges))
        bounds = intervals_from_edges([0.0] + inner, open_ended=True)
        total = math.fsum(rayleigh_state_prob(lo, hi, WindModel(vm)) for lo, hi in bounds)
        assert total == pytest.approx(1.0, abs=1e-9)


class TestPvPower:
    def test_zero_irradiance(self):
        assert pv_output_power(0.0, PV) == 0.0

    def test_fill_factor(self):
        # 17.32 * 4.76 / (21.98 * 5.32)
        assert PV.fill_factor == pytest.approx(0.7050428619, abs=1e-10)

    def test_monotone_in_irradiance(self):
        assert pv_output_power(0.8, PV) > pv_output_power(0.4, PV) > 0

    def test_chain_by_hand(self):
        s = 0.6
        tc = 25.0 + s * (43.0 - 20.0) / 0.8
        i = s * (5.32 + 0.00122 * (tc - 25.0))
        v = 21.98 - 0.0144 * tc
        want = 10 * (17.32 * 4.76) / (21.98 * 5.32) * v * i / 1000.0
        assert pv_output_power(s, PV) == pytest.approx(want, rel=1e-13)

    def test_negative_voltage_clamped(self):
        hot = PvPanelSpec(25.0, 43.0, 5.0, 0.0, 5.32, 21.98, 4.76, 17.32, 1)
        assert pv_output_power(0.9, hot) == 0.0

    @pytest.mark.parametrize(
        "kwargs",
        [dict(mpp_current_A=6.0), dict(mpp_voltage_V=30.0), dict(short_circuit_current_A=-1.0), dict(module_count=0)],
    )
    def test_invalid_spec(self, kwargs):
        base = dict(
            ambient_temp_C=25.0, nominal_op_temp_C=43.0, volt_temp_coeff_V_per_C=0.0144,
            curr_temp_coeff_A_per_C=0.00122, short_circuit_current_A=5.32, open_circuit_voltage_V=21.98,
            mpp_current_A=4.76, mpp_voltage_V=17.32, module_count=1,
        )
        base.update(kwargs)
        with pytest.raises(ConfigurationError):
            PvPanelSpec(**base)


class TestWindPower:
    def test_regions(self):
        assert wind_output_power(3.0, TURBINE) == 0.0
        assert wind_output_power(9.0, TURBINE) == pytest.approx(0.5)
        assert wind_output_power(20.0, TURBINE) == 1.0
        assert wind_output_power(25.5, TURBINE) == 0.0

    @pytest.mark.parametrize("edge", [4.0, 14.0])
    def test_continuous_at_cut_in_and_rated(self, edge):
        h = 1e-13
        left = wind_output_power(edge - h, TURBINE)
        right = wind_output_power(edge + h, TURBINE)
        assert abs(left - right) <= 1e-12

    @given(st.floats(25.0 + 1e-9, 1e6))
    def test_zero_beyond_cut_off(self, v):
        assert wind_output_power(v, TURBINE) == 0.0

    def test_invalid_speeds(self):
        with pytest.raises(ConfigurationError):
            WindTurbineSpec(5.0, 4.0, 25.0, 1.0)


class TestStateTable:
    def test_cardinality_and_total(self):
        table = build_state_table(
            [(0.0, 0.5), (0.5, 1.0)],
            [(0.0, 4.0), (4.0, 10.0), (10.0, math.inf)],
            SolarModel(2.0, 2.5), WindModel(6.0), PV, TURBINE, s_max=100.0,
        )
        assert len(table) == 6
        assert math.fsum(table.probabilities) == pytest.approx(1.0, abs=1e-9)
        assert min(table.powers_kW) >= 0 and min(table.probabilities) >= 0

    def test_product_of_marginals(self):
        wind = WindModel(6.0)
        median = wind.scale * math.sqrt(math.log(2.0))
        table = build_state_table(
            [(0.0, 0.4), (0.4, 1.0)], [(0.0, median), (median, math.inf)],
            SolarModel(1.0, 1.0), wind, PV, TURBINE, s_max=100.0,
        )
        assert table.probabilities == pytest.approx((0.2, 0.2, 0.3, 0.3), abs=1e-9)

    def test_power_is_sum_of_midpoint_outputs(self):
        table = build_state_table(
            [(0.0, 0.4), (0.4, 1.0)], [(0.0, 8.0), (8.0, math.inf)],
            SolarModel(1.0, 1.0), WindModel(6.0), PV, TURBINE, s_max=100.0,
        )
        assert table.powers_kW[0] == pytest.approx(pv_output_power(0.2, PV) + wind_output_power(4.0, TURBINE))
        assert table.powers_kW[2] == pytest.approx(pv_output_power(0.7, PV))
        # the open tail sits beyond cut-off and produces nothing
        assert table.powers_kW[3] == pytest.approx(pv_output_power(0.7, PV))

    @pytest.mark.parametrize(
        "solar,wind",
        [
            ([(0.0, 0.5), (0.6, 1.0)], [(0.0, math.inf)]),
            ([(0.1, 1.0)], [(0.0, math.inf)]),
            ([(0.0, 0.9)], [(0.0, math.inf)]),
            ([(0.0, 1.0)], [(0.0, 5.0)]),
            ([(0.0, 1.0)], [(1.0, math.inf)]),
        ],
    )
    def test_non_partition_rejected(self, solar, wind):
        with pytest.raises(ConfigurationError):
            build_state_table(solar, wind, SolarModel(2, 2), WindModel(6.0), PV, TURBINE, 10.0)

    def test_csv_export(self, tmp_path):
        table = GenerationStateTable.from_pairs([(1.0, 0.25), (3.0, 0.75)], 10.0)
        path = tmp_path / "states.csv"
        table.write_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "state_index,power_kW,probability"
        assert lines[1:] == ["0,1.0,0.25", "1,3.0,0.75"]


class TestSupply:
    def test_expected(self):
        table = GenerationStateTable.from_pairs([(1.0, 0.25), (3.0, 0.75)], 10.0)
        assert supply(0, table, "expected") == pytest.approx(2.5)

    def test_degenerate_sampled(self):
        table = GenerationStateTable.from_pairs([(2.0, 1.0)], 10.0)
        rng = np.random.default_rng(3)
        assert all(supply(t, table, "sampled", rng) == 2.0 for t in range(50))

    def test_clamped_to_s_max(self):
        table = GenerationStateTable.from_pairs([(5.0, 1.0)], 2.0)
        assert supply(0, table, "expected") == 2.0
        assert supply(0, table, "sampled", np.random.default_rng(0)) == 2.0

    def test_sampled_mean_matches_expected(self):
        table = build_state_table(
            intervals_from_edges(np.linspace(0, 1, 11)),
            intervals_from_edges(np.arange(0, 26, 2.0), open_ended=True),
            SolarModel(2.0, 2.5), WindModel(6.0), PV, TURBINE, s_max=100.0,
        )
        draws = supply_trace(100_000, table, "sampled", np.random.default_rng(11))
        stderr = draws.std(ddof=1) / math.sqrt(draws.size)
        assert abs(draws.mean() - supply(0, table, "expected")) <= 3 * stderr

    def test_trace_equals_scalar_calls(self):
        table = GenerationStateTable.from_pairs([(1.0, 0.2), (2.0, 0.3), (4.0, 0.5)], 10.0)
        a = supply_trace(500, table, "sampled", np.random.default_rng(5))
        rng = np.random.default_rng(5)
        b = [supply(t, table, "sampled", rng) for t in range(500)]
        assert a.tolist() == b

    def test_probabilities_validated(self):
        with pytest.raises(ConfigurationError):
            GenerationStateTable.from_pairs([(1.0, 0.5), (2.0, 0.4)], 10.0)
        with pytest.raises(ConfigurationError):
            GenerationStateTable.from_pairs([(-1.0, 1.0)], 10.0)
