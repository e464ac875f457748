"""Velocity misfit, PSO fitting, and window scheduling tests."""

import numpy as np
import pytest

from drift_search.errors import ConfigurationError
from drift_search.fitting import (
    FitProblem,
    pso_fit,
    schedule_fit_windows,
    velocity_rms_error,
)
from drift_search.flow import SurrogateModel
from drift_search.geometry import make_grid, sample_bilinear
from drift_search.lagrangian import DrifterObservation

from test_flow import channel_spec


@pytest.fixture(scope="module")
def twin_setup():
    """Shared small twin problem: truth vector, observations, model."""
    spec = channel_spec(1200.0, 900.0)
    grid = make_grid((1200.0, 900.0), 50.0)
    model = SurrogateModel(spec, grid)
    rng = np.random.default_rng(101)
    b_true = rng.uniform(-25.0, 25.0, size=spec.layout.size)
    truth = model.evaluate(b_true).w_fused
    positions = np.column_stack(
        [rng.uniform(100.0, 1100.0, size=9), rng.uniform(100.0, 800.0, size=9)]
    )
    velocities = sample_bilinear(truth, positions)
    return spec, grid, model, b_true, positions, velocities


def make_problem(twin_setup, **kw):
    spec, grid, model, b_true, positions, velocities = twin_setup
    kw.setdefault("max_iters", 60)
    return FitProblem(
        positions=positions,
        velocities=velocities,
        spec=spec,
        grid=grid,
        rng_seed=kw.pop("rng_seed", 5),
        **kw,
    )


def test_objective_zero_for_exact_match(twin_setup):
    spec, grid, model, b_true, positions, velocities = twin_setup
    prob = make_problem(twin_setup)
    assert velocity_rms_error(b_true, prob, model) < 1e-12


def test_objective_single_residual_345(twin_setup):
    spec, grid, model, _, _, _ = twin_setup
    prob = FitProblem(
        positions=np.array([[600.0, 450.0]]),
        velocities=np.array([[0.3, 0.4]]),
        spec=spec,
        grid=grid,
        max_iters=1,
    )
    # zero vector gives a zero surrogate field, so the residual is w_r itself
    assert velocity_rms_error(np.zeros(spec.layout.size), prob, model) == pytest.approx(0.5)


def test_objective_two_residuals(twin_setup):
    spec, grid, model, _, _, _ = twin_setup
    prob = FitProblem(
        positions=np.array([[600.0, 450.0], [300.0, 300.0]]),
        velocities=np.array([[0.3, 0.0], [0.0, 0.4]]),
        spec=spec,
        grid=grid,
        max_iters=1,
    )
    want = np.sqrt((0.09 + 0.16) / 2.0)
    got = velocity_rms_error(np.zeros(spec.layout.size), prob, model)
    assert got == pytest.approx(want, abs=1e-9)
    assert got == pytest.approx(0.35355, abs=1e-5)


def test_objective_permutation_invariant(twin_setup):
    spec, grid, model, b_true, positions, velocities = twin_setup
    prob1 = make_problem(twin_setup)
    order = np.array([3, 1, 4, 0, 8, 2, 7, 5, 6])
    prob2 = FitProblem(
        positions=positions[order],
        velocities=velocities[order],
        spec=spec,
        grid=grid,
        max_iters=60,
    )
    b = np.full(spec.layout.size, 3.0)
    assert velocity_rms_error(b, prob1, model) == pytest.approx(
        velocity_rms_error(b, prob2, model), abs=1e-12
    )


def test_objective_rejects_out_of_bounds(twin_setup):
    prob = make_problem(twin_setup)
    with pytest.raises(ConfigurationError):
        velocity_rms_error(np.full(prob.spec.layout.size, 60.0), prob)


def test_pso_recovers_twin_flow(twin_setup):
    spec, grid, model, b_true, positions, velocities = twin_setup
    prob = make_problem(twin_setup, rng_seed=11)
    baseline = velocity_rms_error(np.zeros(spec.layout.size), prob, model)
    res = pso_fit(prob, model=model)
    assert res.best_error <= 0.2 * baseline
    assert res.evaluations == 32 * 61  # init sweep plus 60 iterations


def test_pso_bit_reproducible(twin_setup):
    prob1 = make_problem(twin_setup, rng_seed=21, max_iters=15)
    prob2 = make_problem(twin_setup, rng_seed=21, max_iters=15)
    model = SurrogateModel(prob1.spec, prob1.grid)
    r1 = pso_fit(prob1, model=model)
    r2 = pso_fit(prob2, model=model)
    assert np.array_equal(r1.best_vector, r2.best_vector)
    assert r1.best_error == r2.best_error
    assert np.array_equal(r1.error_history, r2.error_history)


def test_pso_history_non_increasing(twin_setup):
    prob = make_problem(twin_setup, rng_seed=31, max_iters=25)
    res = pso_fit(prob)
    assert np.all(np.diff(res.error_history) <= 0.0)
    assert len(res.error_history) == 26


def test_pso_respects_bounds(twin_setup):
    prob = make_problem(twin_setup, rng_seed=41, max_iters=10)
    seen = []

    def spy(b):
        seen.append(b.copy())
        return float(np.sum(b * b))

    pso_fit(prob, objective=spy)
    seen = np.array(seen)
    assert np.all(seen >= prob.lower[None, :] - 1e-12)
    assert np.all(seen <= prob.upper[None, :] + 1e-12)


def test_pso_warm_start_seeds_first_particle(twin_setup):
    spec, grid, model, b_true, positions, velocities = twin_setup
    prob = make_problem(twin_setup, rng_seed=51, max_iters=1)
    prob.warm_start = b_true.copy()
    res = pso_fit(prob, model=model)
    # the warm particle already sits at the optimum, so the best is ~0
    assert res.best_error < 1e-10


def test_pso_wall_clock_budget_terminates(twin_setup):
    prob = make_problem(twin_setup, rng_seed=61, max_iters=None, time_budget=0.4)
    res = pso_fit(prob)
    assert res.wall_time < 5.0
    assert res.iterations >= 1


def test_fit_problem_validation(twin_setup):
    spec, grid, model, b_true, positions, velocities = twin_setup
    with pytest.raises(ConfigurationError):
        FitProblem(
            positions=np.array([[5000.0, 5000.0]]),
            velocities=np.array([[0.0, 0.0]]),
            spec=spec,
            grid=grid,
            max_iters=5,
        )
    with pytest.raises(ConfigurationError):
        FitProblem(
            positions=np.array([[100.0, 100.0]]),
            velocities=np.array([[0.0, 0.0]]),
            spec=spec,
            grid=grid,
        )  # neither budget given


def obs(did, t, x, y, role="fitting"):
    return DrifterObservation(did, t, np.array([x, y]), np.array([0.1, 0.0]), role)


def test_schedule_latest_per_drifter(twin_setup):
    spec, grid, *_ = twin_setup
    stream = []
    for t in np.arange(0.0, 1200.0, 10.0):
        stream.append(obs("a", t, 200.0 + 0.1 * t, 300.0))
        stream.append(obs("b", t, 400.0, 500.0))
    probs = schedule_fit_windows(
        stream, 600.0, spec=spec, grid=grid, max_iters=5, base_seed=7
    )
    assert len(probs) == 2
    assert probs[0].window == (0.0, 600.0)
    assert probs[0].n_observations == 2
    # latest sample of drifter a in window 0 is at t=590
    a_row = probs[0].positions[0]
    assert a_row[0] == pytest.approx(200.0 + 0.1 * 590.0)
    assert probs[0].rng_seed == 7 and probs[1].rng_seed == 8


def test_schedule_excludes_validation_role(twin_setup):
    spec, grid, *_ = twin_setup
    stream = [obs("a", 5.0, 200.0, 300.0), obs("v", 5.0, 250.0, 350.0, "validation")]
    probs = schedule_fit_windows(stream, 600.0, spec=spec, grid=grid, max_iters=5)
    assert len(probs) == 1
    assert probs[0].n_observations == 1


def test_schedule_single_window_single_drifter(twin_setup):
    spec, grid, *_ = twin_setup
    probs = schedule_fit_windows(
        [obs("a", 3.0, 200.0, 300.0)], 600.0, spec=spec, grid=grid, max_iters=5
    )
    assert len(probs) == 1
    assert probs[0].n_observations == 1


def test_schedule_skips_empty_window(twin_setup, caplog):
    spec, grid, *_ = twin_setup
    stream = [obs("a", 0.0, 200.0, 300.0), obs("a", 1300.0, 220.0, 300.0)]
    with caplog.at_level("WARNING"):
        probs = schedule_fit_windows(
            stream, 600.0, spec=spec, grid=grid, max_iters=5, window_start=0.0
        )
    assert [p.window for p in probs] == [(0.0, 600.0), (1200.0, 1800.0)]
    assert any("no usable observations" in r.message for r in caplog.records)


def test_schedule_drops_out_of_grid_positions(twin_setup, caplog):
    spec, grid, *_ = twin_setup
    stream = [obs("a", 0.0, 200.0, 300.0)]
    far = DrifterObservation("b", 0.0, np.array([9000.0, 300.0]), np.array([0.1, 0.0]))
    stream.append(far)
    with caplog.at_level("WARNING"):
        probs = schedule_fit_windows(stream, 600.0, spec=spec, grid=grid, max_iters=5)
    assert probs[0].n_observations == 1
    assert any("outside the grid" in r.message for r in caplog.records)
