import csv
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import DETECTABLE, DEFAULTS
from topoms import synthetic
from topoms.cover import BallCover, indicator_field, length_estimate
from topoms.energy import energy_J
from topoms.errors import ConfigError, SolverError
from topoms.fem import assemble, cell_gradients, solve_cg
from topoms.grid import CellField, ImageGrid
from topoms.oracle import descent_audit
from topoms.topo import TopoConfig, accept_test, predicted_delta_G, run, select_batch


@pytest.fixture
def default_cfg():
    return TopoConfig(batch_size=1, **DEFAULTS)


def test_predicted_delta_G(default_cfg):
    assert predicted_delta_G(0.0, default_cfg) == 0.0
    expected = -(0.05**2) * math.pi * 20 * (0.99 / 1.01)
    assert predicted_delta_G(1.0, default_cfg) == pytest.approx(expected, rel=1e-14)
    assert expected == pytest.approx(-0.15397, abs=5e-6)
    doubled = TopoConfig(alpha=20.0, beta=200.0, epsilon=0.1, kappa=0.01)
    assert predicted_delta_G(3.0, doubled) == pytest.approx(4 * predicted_delta_G(3.0, default_cfg), rel=1e-14)


def test_accept_threshold(default_cfg):
    thr = 2 * 200 * 1.01 / (0.05 * 20 * math.pi * 0.99)
    assert thr == pytest.approx(129.92, abs=0.05)
    assert default_cfg.accept_threshold == pytest.approx(thr, rel=1e-14)
    assert not accept_test(0.0, default_cfg)
    assert accept_test(130.0, default_cfg)
    assert not accept_test(129.0, default_cfg)


@given(st.floats(0, 1e4), st.floats(1e-3, 10), st.floats(1e-3, 100), st.floats(0.01, 0.2))
def test_accept_iff_predicted_J_nonpositive(gsq, alpha, beta, eps):
    kappa = min(0.01, eps, 0.5 / alpha)
    cfg = TopoConfig(alpha=alpha, beta=beta, epsilon=eps, kappa=kappa)
    dj = predicted_delta_G(gsq, cfg) + 2 * beta * eps
    if abs(dj) > 1e-9 * 2 * beta * eps:  # away from the rounding-level tie
        assert accept_test(gsq, cfg) == (dj <= 0)


def test_config_validation():
    with pytest.raises(ConfigError, match="alpha\\*kappa"):
        TopoConfig(alpha=200.0, beta=1.0, epsilon=0.05, kappa=0.01)
    with pytest.raises(ConfigError, match="exceed epsilon"):
        TopoConfig(alpha=1.0, beta=1.0, epsilon=0.05, kappa=0.1)
    with pytest.raises(ConfigError):
        TopoConfig(alpha=-1.0, beta=1.0, epsilon=0.05)
    with pytest.raises(ConfigError):
        TopoConfig(alpha=1.0, beta=float("nan"), epsilon=0.05)
    with pytest.raises(ConfigError):
        TopoConfig(alpha=1.0, beta=1.0, epsilon=0.05, batch_size=0)
    cfg = TopoConfig(alpha=1.0, beta=1.0, epsilon=0.005)
    assert cfg.kappa == 0.005 and cfg.separation == 0.005
    with pytest.raises(ConfigError, match="2h"):
        cfg.check_grid(ImageGrid(np.zeros((65, 65))))


# --- select_batch ---------------------------------------------------------

def greedy_reference(gsq, grid, cover, cfg):
    """Loop-only restatement of the batch rule."""
    remaining = {(j, i) for j in range(grid.ny) for i in range(grid.nx)}
    chosen = []
    while remaining and len(chosen) < cfg.batch_size:
        j, i = min(remaining, key=lambda c: (-gsq[c], c[0] * grid.nx + c[1]))
        remaining.discard((j, i))
        p = ((i + 0.5) * grid.h, (j + 0.5) * grid.h)
        if cover.contains(*p):
            continue
        if not accept_test(gsq[j, i], cfg):
            break
        if any(math.dist(p, q) < cfg.separation for q in chosen):
            continue
        chosen.append(p)
    return chosen


def test_select_zero_field():
    g = ImageGrid(np.zeros((5, 5)))
    cfg = TopoConfig(alpha=1.0, beta=1.0, epsilon=0.5, kappa=0.01)
    assert select_batch(CellField.constant(g, 0.0), BallCover(0.5, 0.01), cfg) == []


def test_select_single_peak():
    g = ImageGrid(np.zeros((9, 9)))
    cfg = TopoConfig(alpha=1.0, beta=1.0, epsilon=0.25, kappa=0.01, batch_size=3)
    gsq = np.zeros(g.cell_shape)
    gsq[5, 2] = 10 * cfg.accept_threshold
    assert select_batch(CellField(g, gsq), BallCover(0.25, 0.01), cfg) == [((2.5) * g.h, (5.5) * g.h)]


def test_select_tie_break_by_linear_index():
    g = ImageGrid(np.zeros((5, 5)))  # 4 x 4 cells, h = 1/4
    cfg = TopoConfig(alpha=1.0, beta=1.0, epsilon=0.25, kappa=0.01, batch_size=2, separation=0.6)
    gsq = np.zeros(g.cell_shape)
    gsq[1, 3] = gsq[2, 1] = 2 * cfg.accept_threshold  # linear indices 7 and 9, distance ~0.56
    cover = BallCover(0.25, 0.01)
    got = select_batch(CellField(g, gsq), cover, cfg)
    assert got == greedy_reference(gsq, g, cover, cfg)
    assert got == [(3.5 * g.h, 1.5 * g.h)]


@given(st.integers(0, 2**31 - 1), st.integers(1, 5), st.floats(0.0, 0.6))
def test_select_matches_reference(seed, batch, sep):
    rng = np.random.default_rng(seed)
    g = ImageGrid(np.zeros((5, 5)))
    cfg = TopoConfig(alpha=1.0, beta=1.0, epsilon=0.25, kappa=0.01, batch_size=batch, separation=sep)
    gsq = np.round(rng.uniform(0, 3, g.cell_shape), 1) * cfg.accept_threshold  # many ties
    cover = BallCover(0.25, 0.01, ((0.5, 0.5),)) if seed % 2 else BallCover(0.25, 0.01)
    assert select_batch(CellField(g, gsq), cover, cfg) == greedy_reference(gsq, g, cover, cfg)


def test_select_invariant_under_intensity_scaling():
    g = synthetic.gaussian_bump(64)
    lam = 0.5
    gh = ImageGrid(lam * g.f)
    cfg = TopoConfig(alpha=0.01, beta=2e-4, epsilon=0.05, kappa=0.01, batch_size=4)
    cfg_l = TopoConfig(alpha=0.01, beta=lam**2 * 2e-4, epsilon=0.05, kappa=0.01, batch_size=4)
    v = CellField.constant(g, 1.0)
    u, _ = solve_cg(assemble(g, v, cfg.alpha), 1e-12)
    ul, _ = solve_cg(assemble(gh, CellField.constant(gh, 1.0), cfg.alpha), 1e-12)
    gsq, gsql = cell_gradients(u)[2], cell_gradients(ul)[2]
    np.testing.assert_allclose(gsql.values, lam**2 * gsq.values, rtol=1e-8, atol=1e-14)
    assert np.argmax(gsq.values) == np.argmax(gsql.values)
    empty = BallCover(0.05, 0.01)
    first = select_batch(gsq, empty, cfg)
    assert first and first == select_batch(gsql, empty, cfg_l)


def test_gradient_field_reflection_symmetry():
    # symmetric about x = 1/2
    g = ImageGrid.from_function(lambda X, Y: 0.5 + 0.4 * np.cos(2 * np.pi * X) * np.sin(np.pi * Y), 64)
    u, _ = solve_cg(assemble(g, CellField.constant(g, 1.0), 0.01), 1e-12)
    gsq = cell_gradients(u)[2].values
    np.testing.assert_allclose(gsq, gsq[:, ::-1], atol=1e-9 * gsq.max())


# --- run -------------------------------------------------------------------

def test_constant_image_stops_immediately():
    g = synthetic.constant_image(64, 0.3)
    res = run(g, TopoConfig(**DEFAULTS))
    assert res.stopped_by == "threshold"
    assert len(res.cover) == 0 and len(res.trace) == 1
    np.testing.assert_allclose(res.u.values, 0.3, atol=1e-9)


def test_default_parameters_on_unit_step_insert_nothing(step128, default_cfg):
    # max |grad u|^2 ~ 1.5e-4 against an acceptance threshold ~ 130
    res = run(step128, default_cfg)
    gsq = cell_gradients(res.u)[2].values
    assert gsq.max() < 1e-3 < default_cfg.accept_threshold
    assert res.stopped_by == "threshold" and len(res.cover) == 0
    assert all(abs(x - 0.5) <= 0.05 + step128.h for x, _ in res.cover.centers)


def test_detectable_step_run(detectable_run, step128):
    res = detectable_run
    g = step128
    assert res.stopped_by == "threshold"
    assert len(res.cover) == len(res.trace) - 1  # one ball per accepted iteration
    assert all(abs(x - 0.5) <= DETECTABLE["epsilon"] + g.h for x, _ in res.cover.centers)
    assert descent_audit(res.trace)
    assert all(b < a for a, b in zip(res.trace.totals, res.trace.totals[1:]))
    assert 0.8 <= length_estimate(res.cover) <= 3.0
    # result invariants
    np.testing.assert_array_equal(res.v.values, indicator_field(res.cover, g).values)
    u2, _ = solve_cg(assemble(g, res.v, DETECTABLE["alpha"]), 1e-11, warm_start=res.u)
    assert np.max(np.abs(u2.values - res.u.values)) < 1e-6


def test_trace_records_and_cover_growth(detectable_run, step128):
    recs = detectable_run.trace.records
    assert recs[0].iter == 0 and recs[0].centers == () and recs[0].n_total_balls == 0
    cover = BallCover(0.05, 0.01)
    for r in recs[1:]:
        assert r.n_total_balls == len(cover) + len(r.centers)
        for p in r.centers:
            assert not cover.contains(*p)
        cover = cover.add(r.centers)
        assert all(pj <= 0 for pj in r.predicted)
        assert r.solver.converged
    # recomputed energy agrees with an independent evaluation of the final state
    final = energy_J(detectable_run.u, detectable_run.cover, step128, DETECTABLE["alpha"], DETECTABLE["beta"])
    assert recs[-1].energy.total == pytest.approx(final.total, rel=1e-14)


def test_boundary_flags(detectable_run):
    for r in detectable_run.trace.records[1:]:
        for (x, y), flag in zip(r.centers, r.near_boundary):
            assert flag == (min(x, y, 1 - x, 1 - y) < 0.05)
    assert any(any(r.near_boundary) for r in detectable_run.trace.records)


def test_batched_run_respects_separation(step128):
    res = run(step128, TopoConfig(batch_size=16, **DETECTABLE))
    assert res.stopped_by in ("threshold", "no_candidates")
    for r in res.trace.records[1:]:
        pts = r.centers
        assert 1 <= len(pts) <= 16
        for a in range(len(pts)):
            for b in range(a):
                assert math.dist(pts[a], pts[b]) >= DETECTABLE["epsilon"]
    assert all(abs(x - 0.5) <= 0.05 + step128.h for x, _ in res.cover.centers)
    assert len(res.trace) < 10


def test_max_iters_stop(step128):
    res = run(step128, TopoConfig(batch_size=1, max_iters=3, **DETECTABLE))
    assert res.stopped_by == "max_iters"
    assert len(res.cover) == 3


def test_solver_failure_carries_partial_trace(step128):
    cfg = TopoConfig(batch_size=1, cg_max_iter=3, **DETECTABLE)
    with pytest.raises(SolverError) as info:
        run(step128, cfg)
    assert info.value.trace is not None and info.value.report is not None
    assert not info.value.report.converged


def test_trace_csv(detectable_run, tmp_path):
    p = tmp_path / "trace.csv"
    detectable_run.trace.write_csv(p)
    rows = list(csv.reader(p.open()))
    assert rows[0] == ["iter", "n_new_balls", "n_total_balls", "fidelity", "dirichlet", "length", "total", "cg_iters"]
    assert len(rows) == len(detectable_run.trace) + 1
    last = rows[-1]
    assert int(last[2]) == len(detectable_run.cover)
    assert float(last[6]) == detectable_run.trace.totals[-1]
