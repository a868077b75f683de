from __future__ import annotations

import math
import warnings
from decimal import Decimal, localcontext

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar

from campaign_forge import resilience
from campaign_forge.errors import InvalidInputs
from campaign_forge.presets import reference_scenario
from campaign_forge.resilience import (
    YoungDalyValidityWarning,
    plan_checkpoint,
    startup_failure_prob,
    to_iterations,
    vetting_value,
    waste_fraction,
    young_daly_interval,
)


def test_young_daly_example():
    assert young_daly_interval(60, 7200) == pytest.approx(929.516, abs=1e-3)


def test_cadence_rounds_to_250_iterations():
    plan = plan_checkpoint(60, 7200, 3.72)
    assert plan.interval_iterations == 250
    assert plan.interval_seconds / 3.72 == pytest.approx(249.9, abs=0.05)


@given(c=st.floats(1e-3, 1e4), m=st.floats(1e2, 1e8), k=st.floats(1e-3, 1e3))
def test_interval_is_homogeneous(c, m, k):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", YoungDalyValidityWarning)
        assert young_daly_interval(k * c, k * m) == pytest.approx(k * young_daly_interval(c, m), rel=1e-12)


def test_validity_warning_and_errors():
    with pytest.warns(YoungDalyValidityWarning):
        young_daly_interval(4000, 7200)
    assert plan_checkpoint(4000, 7200).warnings
    assert not plan_checkpoint(60, 7200).warnings
    for bad in [(0, 7200), (60, 0), (-1, 10)]:
        with pytest.raises(InvalidInputs):
            young_daly_interval(*bad)
    with pytest.raises(InvalidInputs):
        waste_fraction(0, 60, 7200)


def test_waste_at_the_optimum():
    opt = young_daly_interval(60, 7200)
    assert waste_fraction(opt, 60, 7200) == pytest.approx(math.sqrt(2 * 60 / 7200))
    assert waste_fraction(opt, 60, 7200) == pytest.approx(0.1291, abs=1e-4)
    assert waste_fraction(100, 60, math.inf) == 0.6
    assert waste_fraction(opt, 60, 7200, restore_cost=72) == pytest.approx(0.1291 + 0.01, abs=1e-4)


def test_sensitivity_rows_bracket_the_optimum():
    plan = plan_checkpoint(60, 7200, 3.72, restore_cost=30)
    rows = plan.records()
    assert [r["scale"] for r in rows] == [0.5, 0.75, 1.0, 1.25, 1.5]
    best = min(rows, key=lambda r: r["waste_fraction"])
    assert best["scale"] == 1.0
    assert plan.summary()["interval_iterations"] == 250


def _grid_and_golden(c: float, m: float) -> tuple[np.ndarray, float, float]:
    grid = np.geomspace(c, m, 240)
    waste = [waste_fraction(x, c, m) for x in grid]
    i = int(np.argmin(waste))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    res = minimize_scalar(lambda x: waste_fraction(x, c, m), bracket=(lo, grid[i], hi), method="golden", tol=1e-10)
    return grid, float(grid[i]), float(res.x)


def test_numerical_minimiser_agrees_with_the_formula():
    rng = np.random.default_rng(2024)
    for _ in range(50):
        m = float(10 ** rng.uniform(3, 7))
        c = float(m / 10 * 10 ** rng.uniform(-4, 0))
        grid, on_grid, refined = _grid_and_golden(c, m)
        yd = young_daly_interval(c, m)
        step = math.log(grid[1] / grid[0])
        assert abs(math.log(on_grid / yd)) <= step
        assert refined == pytest.approx(yd, rel=1e-4)


def test_to_iterations_rounding():
    assert to_iterations(929.5, 3.72) == 250
    assert to_iterations(10.0, 1.0) == 10
    assert to_iterations(14.9, 1.0) == 10
    assert to_iterations(15.0, 1.0) == 20
    assert to_iterations(3.0, 1.0) == 3
    assert to_iterations(0.1, 1.0) == 1
    with pytest.raises(InvalidInputs):
        to_iterations(10.0, 0.0)


# -- startup failures --------------------------------------------------------


def test_port_collision_anchor():
    assert startup_failure_prob(0.006, 256) == pytest.approx(0.7858, abs=5e-4)
    assert startup_failure_prob(0.006, 256) == pytest.approx(1 - 0.994**256, rel=1e-12)


def test_startup_boundaries():
    assert startup_failure_prob(0.0, 10**6) == 0.0
    assert startup_failure_prob(1.0, 1) == 1.0
    with pytest.raises(InvalidInputs):
        startup_failure_prob(1.5, 3)
    with pytest.raises(InvalidInputs):
        startup_failure_prob(0.1, 0)


def test_tiny_probabilities_keep_their_precision():
    with localcontext() as ctx:
        ctx.prec = 60
        exact = 1 - (1 - Decimal(1e-9)) ** 1_000_000
        got = startup_failure_prob(1e-9, 1_000_000)
        # 1 - exp(-1e-3)
        assert got == pytest.approx(9.995e-4, rel=1e-4)
        assert abs(Decimal(got) - exact) / exact < Decimal("1e-6")
        # the naive formula loses digits here
        naive = 1 - (1 - 1e-9) ** 1_000_000
        assert abs(Decimal(naive) - exact) / exact > abs(Decimal(got) - exact) / exact


@given(p=st.floats(0, 1), q=st.floats(0, 1), n=st.integers(1, 10**6), k=st.integers(0, 1000))
def test_startup_probability_is_monotone_and_union_bounded(p, q, n, k):
    lo, hi = sorted((p, q))
    assert startup_failure_prob(lo, n) <= startup_failure_prob(hi, n)
    assert startup_failure_prob(p, n) <= startup_failure_prob(p, n + k)
    assert startup_failure_prob(p, n) <= n * p * (1 + 1e-12)
    assert 0.0 <= startup_failure_prob(p, n) <= 1.0


def test_combined_probability():
    assert resilience.combined_failure_prob(0.5, 0.5) == pytest.approx(0.75)
    assert resilience.combined_failure_prob() == 0.0
    assert resilience.combined_failure_prob(0.2, 1.0) == 1.0


# -- vetting -----------------------------------------------------------------


def test_vetting_example():
    loss = 4096 * 900.0
    p = startup_failure_prob(0.9 * 0.001, 1024)
    assert p == pytest.approx(0.602, abs=1e-3)
    value = vetting_value(60, 0.9, 0.001, 1024, loss)
    assert value == pytest.approx(p * loss - 60 * 4096)
    assert value == pytest.approx(1.97e6, rel=5e-3)


def test_useless_test_costs_exactly_its_duration():
    assert vetting_value(60, 0.0, 0.01, 32, 1e9) == -60 * 32 * 4


@given(
    s1=st.floats(0, 1),
    s2=st.floats(0, 1),
    l1=st.floats(0, 1e9),
    l2=st.floats(0, 1e9),
    b=st.floats(0, 1),
    nodes=st.integers(1, 4096),
)
def test_vetting_value_is_monotone(s1, s2, l1, l2, b, nodes):
    slo, shi = sorted((s1, s2))
    llo, lhi = sorted((l1, l2))
    assert vetting_value(30, slo, b, nodes, l1) <= vetting_value(30, shi, b, nodes, l1)
    assert vetting_value(30, s1, b, nodes, llo) <= vetting_value(30, s1, b, nodes, lhi)


def test_vetting_rejects_bad_fractions():
    with pytest.raises(InvalidInputs):
        vetting_value(1, 1.5, 0.1, 4, 10)


def test_preflight_threshold():
    assert resilience.passes_preflight(0.90)
    assert not resilience.passes_preflight(0.899)
    assert resilience.passes_preflight(0.5, threshold=0.5)


def test_failure_analytics_of_the_reference():
    s = reference_scenario()
    fa = resilience.failure_analytics(s, 3.72)
    assert fa.cluster_mtbf == pytest.approx(s.cluster.node_mtbf / s.scheduler.alloc_nodes)
    assert 0 <= fa.p_job_startup_fail <= 1
    assert 0 <= fa.expected_waste_fraction <= 1
