import json

import numpy as np
import pytest

from hybridcomp.bcd import (
    CONVERGED, FEAS_TOL, InfeasibleInstanceError, bcd_loop, complexity_estimate, initialize_feasible, run_bcd,
)
from hybridcomp.config import DESK, PAPER
from hybridcomp.model import check_feasibility, energy
from hybridcomp.scenario import INIT_STREAM, build_scenario, stream


def test_init_feasible_at_full_scale():
    sc = build_scenario(PAPER, 0)
    d = initialize_feasible(PAPER, sc, stream(0, INIT_STREAM))
    assert check_feasibility(PAPER, sc, d, tol=1e-6).feasible
    # round robin and equal split
    np.testing.assert_array_equal(np.argmax(d.alpha, axis=0), np.arange(200) % 10)
    np.testing.assert_allclose(d.l.sum(axis=1), PAPER.data_demand_Dk)
    assert np.all(d.l[d.alpha > 0] == PAPER.data_demand_Dk / 20)


def test_init_too_much_data():
    cfg = DESK.replace(data_demand_Dk=1e10)
    with pytest.raises(InfeasibleInstanceError) as info:
        initialize_feasible(cfg, build_scenario(cfg, 0))
    assert info.value.family in ("compute", "edge_power")


def test_init_unreachable_mse():
    cfg = DESK.replace(mse_threshold_zeta=1e-3)
    with pytest.raises(InfeasibleInstanceError) as info:
        initialize_feasible(cfg, build_scenario(cfg, 0))
    assert info.value.family == "mse"


def test_init_needs_a_slot_per_user():
    cfg = DESK.replace(num_slots_I=3)
    with pytest.raises(InfeasibleInstanceError):
        initialize_feasible(cfg, build_scenario(cfg, 0))


def test_init_randomized():
    sc = build_scenario(DESK, 0)
    a = initialize_feasible(DESK, sc, stream(1, INIT_STREAM))
    b = initialize_feasible(DESK, sc, stream(2, INIT_STREAM))
    assert not np.allclose(a.b, b.b)
    for d in (a, b):
        assert check_feasibility(DESK, sc, d, tol=1e-6).feasible


def test_run_descends_and_ends_feasible():
    sc = build_scenario(DESK, 11)
    d, trace = run_bcd(DESK, sc, stream(11, INIT_STREAM))
    e = trace.totals()
    assert np.all(e[1:] <= e[:-1] * (1 + 1e-6))
    assert trace.termination == CONVERGED
    assert check_feasibility(DESK, sc, d, tol=FEAS_TOL).feasible
    assert d.binary and set(np.unique(d.alpha)) <= {0.0, 1.0}
    assert energy(DESK, d).total == pytest.approx(e[-1])
    assert len(trace.records) <= DESK.bcd_max_iters + 1


def test_loose_epsilon_stops_after_one_pass():
    cfg = DESK.replace(bcd_epsilon0=1.0)
    _, trace = run_bcd(cfg, build_scenario(cfg, 0))
    assert trace.iterations == 1 and trace.termination == CONVERGED


def test_iteration_cap():
    cfg = DESK.replace(bcd_epsilon0=1e-15, bcd_max_iters=2)
    _, trace = run_bcd(cfg, build_scenario(cfg, 0))
    assert trace.iterations <= 2 and trace.termination in ("max-iters", CONVERGED)


def test_reproducible_trace():
    sc = build_scenario(DESK, 5)
    _, t1 = run_bcd(DESK, sc, stream(5, INIT_STREAM))
    _, t2 = run_bcd(DESK, sc, stream(5, INIT_STREAM))
    assert t1.to_jsonl(timing=False) == t2.to_jsonl(timing=False)


def test_trace_jsonl(tmp_path):
    _, trace = run_bcd(DESK, build_scenario(DESK, 1))
    path = tmp_path / "t.jsonl"
    trace.to_jsonl(path)
    recs = [json.loads(x) for x in path.read_text().splitlines()]
    assert recs[-1]["termination"] == trace.termination
    assert [r["iteration"] for r in recs[:-1]] == list(range(len(trace.records)))
    assert {"energy", "residuals", "statuses", "feasible", "wall_ms"} <= set(recs[0])


def test_frozen_blocks_never_move():
    sc = build_scenario(DESK, 2)
    d0 = initialize_feasible(DESK, sc)
    d, _ = bcd_loop(DESK, sc, d0, freeze_l=True, freeze_alpha=True)
    np.testing.assert_array_equal(d.alpha, d0.alpha)
    np.testing.assert_array_equal(d.l, d0.l)


def test_complexity_counts():
    rep = complexity_estimate(PAPER, 7)
    assert rep.omega == pytest.approx(2200.0**3.5)
    assert rep.theta == pytest.approx((200 * 30) ** 3.5)
    assert rep.xi == pytest.approx(2000.0**3.5)
    assert rep.total == pytest.approx(7 * (rep.omega + rep.theta + rep.xi))
    tiny = complexity_estimate(DESK.replace(num_slots_I=1, num_aircomp_J=0, num_edge_K=1))
    assert (tiny.omega, tiny.theta, tiny.xi) == pytest.approx((2**3.5, 1.0, 1.0))
