import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybridcomp.baselines import (
    channel_inversion, equal_offloading, inversion_scaling, run_method,
)
from hybridcomp.bcd import FEAS_TOL, InfeasibleInstanceError
from hybridcomp.config import DESK
from hybridcomp.model import check_feasibility
from hybridcomp.scenario import build_scenario, stream


def test_equal_offloading_loads():
    sc = build_scenario(DESK, 0)
    d, e = equal_offloading(DESK, sc)
    loads = d.l[d.alpha > 0]
    np.testing.assert_allclose(loads, DESK.data_demand_Dk * DESK.num_edge_K / DESK.num_slots_I)
    assert check_feasibility(DESK, sc, d, tol=FEAS_TOL).feasible
    assert e.total > 0


def test_equal_offloading_single_user():
    cfg = DESK.replace(num_edge_K=1, num_aircomp_J=3)
    d, _ = equal_offloading(cfg, build_scenario(cfg, 0))
    np.testing.assert_array_equal(d.alpha, 1.0)
    np.testing.assert_allclose(d.l, cfg.data_demand_Dk / cfg.num_slots_I)


def test_inversion_equal_gains_full_power():
    cfg = DESK.replace(noise_power_sigma0sq=1e-300)
    h = np.full((4, 3), 3e-6 * np.exp(0.3j))
    np.testing.assert_allclose(np.abs(inversion_scaling(cfg, h)), 1.0)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32), st.integers(1, 6), st.booleans())
def test_inversion_within_budget(seed, J, conj):
    rng = stream(seed, 0)
    cfg = DESK.replace(p_max_aircomp=float(rng.uniform(0.1, 3.0)), conjugate_phase=conj)
    h = rng.lognormal(-13, 2, (J, 7)) * np.exp(1j * rng.uniform(0, 6.3, (J, 7)))
    b = inversion_scaling(cfg, h)
    assert np.all(np.abs(b) ** 2 <= cfg.p_max_aircomp * (1 + 1e-12))


def test_inversion_phase_conventions():
    h = np.array([[1e-6 * np.exp(0.5j)], [2e-6 * np.exp(-1.0j)]])
    as_written = inversion_scaling(DESK, h)
    co_phased = inversion_scaling(DESK.replace(conjugate_phase=True), h)
    np.testing.assert_allclose(np.angle(as_written[:, 0]), [0.5, -1.0])
    np.testing.assert_allclose(np.angle(co_phased[:, 0] * h[:, 0]), 0.0, atol=1e-12)


def test_inversion_keeps_b_fixed():
    for seed in range(20):
        sc = build_scenario(DESK, seed)
        try:
            d, _ = channel_inversion(DESK, sc)
        except InfeasibleInstanceError as exc:
            assert exc.family == "mse"
            continue
        np.testing.assert_array_equal(d.b, inversion_scaling(DESK, sc.h_aircomp))
        assert check_feasibility(DESK, sc, d, tol=FEAS_TOL).feasible
        return
    pytest.fail("no feasible inversion instance among 20 seeds")


def test_inversion_infeasible_diagnostic():
    cfg = DESK.replace(mse_threshold_zeta=0.2)
    with pytest.raises(InfeasibleInstanceError) as info:
        channel_inversion(cfg, build_scenario(cfg, 0))
    assert info.value.family == "mse" and "MSE" in str(info.value)


def test_run_method_dispatch():
    sc = build_scenario(DESK, 0)
    for m in ("bcd", "equal"):
        _, trace = run_method(m, DESK, sc, 0)
        assert trace.method == m
    with pytest.raises(ValueError):
        run_method("greedy", DESK, sc, 0)
