"""Synthetic drifter fleet generation."""

from types import SimpleNamespace

import numpy as np
import pytest

from drift_search import (
    BoundarySegment,
    BoundarySpec,
    ConfigurationError,
    VectorField,
    make_grid,
    sample_bilinear,
)
from drift_search.drifters import deploy_positions, synthesize_drifters


def square_spec():
    return BoundarySpec(
        segments=[
            BoundarySegment("wall", np.array([[0.0, 0.0], [600.0, 0.0]]), 4),
            BoundarySegment("open", np.array([[600.0, 0.0], [600.0, 600.0]]), 4),
            BoundarySegment("wall", np.array([[600.0, 600.0], [0.0, 600.0]]), 4),
            BoundarySegment("open", np.array([[0.0, 600.0], [0.0, 0.0]]), 4),
        ],
        circle_center=(300.0, 300.0),
        circle_radius=1500.0,
        n_circle=8,
    )


@pytest.fixture(scope="module")
def setup():
    spec = square_spec()
    grid = make_grid((600.0, 600.0), 30.0)
    rng = np.random.default_rng(2)
    truth_vector = rng.uniform(-20.0, 20.0, spec.layout.size)
    return spec, grid, truth_vector


def fleet(setup, **kw):
    spec, grid, truth_vector = setup
    args = dict(
        deploy_center=(300.0, 300.0),
        deploy_radius=100.0,
        duration=300.0,
        seed=5,
    )
    args.update(kw)
    return synthesize_drifters(spec, grid, truth_vector, **args)


class TestDeployment:
    def test_positions_inside_disc_on_sea(self, setup):
        spec, grid, _ = setup
        rng = np.random.default_rng(0)
        pts = deploy_positions(rng, grid, (300.0, 300.0), 100.0, 50)
        d = np.hypot(pts[:, 0] - 300.0, pts[:, 1] - 300.0)
        assert np.all(d <= 100.0)
        for p in pts:
            assert grid.is_sea_at(p)

    def test_radius_must_be_positive(self, setup):
        _, grid, _ = setup
        rng = np.random.default_rng(0)
        with pytest.raises(ConfigurationError):
            deploy_positions(rng, grid, (300.0, 300.0), 0.0, 1)

    def test_unplaceable_disc_rejected(self, setup):
        _, grid, _ = setup
        rng = np.random.default_rng(0)
        with pytest.raises(ConfigurationError, match="could not place"):
            deploy_positions(rng, grid, (5000.0, 5000.0), 10.0, 1)


class TestFleet:
    def test_ids_and_role_blocks(self, setup):
        out = fleet(setup)
        assert sorted(out.roles) == [f"d{k:02d}" for k in range(1, 13)]
        assert [out.roles[f"d{k:02d}"] for k in range(1, 13)] == (
            ["fitting"] * 4 + ["local"] * 5 + ["validation"] * 3
        )
        for obs in out.observations:
            assert obs.role == out.roles[obs.drifter_id]

    def test_beacon_cadence_and_span(self, setup):
        out = fleet(setup, duration=60.0, cadence=10.0)
        times = sorted({o.t for o in out.observations if o.drifter_id == "d01"})
        assert times == [0.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0]

    def test_deterministic_for_seed(self, setup):
        a = fleet(setup)
        b = fleet(setup)
        assert len(a.observations) == len(b.observations)
        for oa, ob in zip(a.observations, b.observations):
            assert oa.drifter_id == ob.drifter_id and oa.t == ob.t
            assert np.array_equal(oa.position, ob.position)
            assert np.array_equal(oa.velocity, ob.velocity)
        c = fleet(setup, seed=6)
        assert not np.array_equal(
            a.observations[0].position, c.observations[0].position
        )

    def test_noise_free_velocity_is_truth_at_position(self, setup):
        out = fleet(setup, noise_sigma=0.0)
        for obs in out.observations[:200]:
            want = sample_bilinear(out.truth, obs.position)
            assert np.allclose(obs.velocity, want, atol=1e-12)

    def test_noise_level_matches_sigma(self, setup):
        out = fleet(setup, noise_sigma=0.02, duration=300.0)
        residuals = []
        for obs in out.observations:
            want = np.asarray(sample_bilinear(out.truth, obs.position))
            residuals.extend(obs.velocity - want)
        residuals = np.array(residuals)
        assert abs(residuals.mean()) < 0.005
        assert abs(residuals.std() - 0.02) < 0.003

    def test_positions_follow_truth_trajectories(self, setup):
        out = fleet(setup)
        for drifter_id, traj in out.trajectories.items():
            rows = [o for o in out.observations if o.drifter_id == drifter_id]
            assert len(rows) == len(traj.times)
            for obs, t, p in zip(rows, traj.times, traj.positions):
                assert obs.t == t
                assert np.array_equal(obs.position, p)

    def test_empty_fleet_rejected(self, setup):
        with pytest.raises(ConfigurationError):
            fleet(setup, n_fitting=0, n_local=0, n_validation=0)


class TestBeaching:
    def test_exited_drifter_reports_rest_position_and_zero_flow(self, setup):
        spec, grid, _ = setup
        ones = np.ones((grid.ny, grid.nx))
        sweep = VectorField(grid, 1.0 * ones, 0.0 * ones)
        stub = SimpleNamespace(evaluate=lambda vec: SimpleNamespace(w_fused=sweep))
        out = synthesize_drifters(
            spec,
            grid,
            np.zeros(spec.layout.size),
            deploy_center=(450.0, 300.0),
            deploy_radius=50.0,
            duration=900.0,
            noise_sigma=0.0,
            seed=3,
            model=stub,
        )
        froze = 0
        for drifter_id, traj in out.trajectories.items():
            if not traj.frozen:
                continue
            froze += 1
            rows = [o for o in out.observations if o.drifter_id == drifter_id]
            after = [o for o in rows if o.t > traj.frozen_at]
            assert after, "a frozen track should still report at cadence"
            for obs in after:
                assert np.array_equal(obs.position, traj.final_position)
                assert np.array_equal(obs.velocity, np.zeros(2))
        assert froze == len(out.trajectories)
