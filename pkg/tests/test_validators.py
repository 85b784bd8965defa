"""Statistical validators: sharp zero-temperature limits, frozen-regime
Monte Carlo checks, and the report plumbing around them."""

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spinflow import validators
from spinflow.exceptions import ConfigError
from spinflow.lattice import ModelParams, make_initial_condition
from spinflow.metropolis import run_mh
from spinflow.trajectory import TrajectoryRecord

EPS_SWEEP = [0.05, 0.02, 0.01]


@pytest.fixture
def steep_chain():
    """Short steep chain where the one-step expansion is clean at eps = 0.05.

    Three sites keep the mean of the quadratic delta-H term small relative to
    the fluctuation of the linear term, so the acceptance rectifier stays in
    its symmetric regime over the whole sweep.
    """
    params = ModelParams(model="heisenberg", N=3, dt=1e-4, beta=0.5, L=1.0)
    config = make_initial_condition("out_of_equilibrium", params, amplitude=1.3)
    return config, params


def _cold(params):
    """Essentially-zero inverse temperature: every proposal is accepted."""
    return ModelParams(
        model=params.model, N=params.N, dt=params.dt, beta=1e-300, L=params.L
    )


class TestValidateDrift:
    def test_zero_temperature_residual_is_quartic(self, steep_chain):
        # with alpha == 1 the controlled estimator has zero variance and the
        # residual is the exact radial defect |E[(1+e^2 Q)^{-1/2}] - 1 + e^2|,
        # which is 3 e^4 + O(e^6) for the sphere
        config, params = steep_chain
        rep = validators.validate_drift(config, _cold(params), EPS_SWEEP, 10_000)
        assert rep["passed"]
        assert rep["residual_slope"] == pytest.approx(4.0, abs=0.05)
        for lv in rep["levels"]:
            assert max(lv["standard_errors"]) == 0.0
            for r in lv["residual_norms"]:
                assert r == pytest.approx(3.0 * lv["eps"] ** 4, rel=0.05)

    def test_frozen_regime_passes(self, steep_chain):
        config, params = steep_chain
        rep = validators.validate_drift(config, params, EPS_SWEEP, 50_000, seed=0)
        assert rep["passed"]
        assert rep["residual_slope"] >= 2.7
        for lv in rep["levels"]:
            assert lv["sites_within_band"]

    def test_prediction_scale_dominates_allowance(self, steep_chain):
        # the band must have teeth: the predicted drift magnitude at the
        # smallest eps is much larger than the C eps^3 allowance
        config, params = steep_chain
        rep = validators.validate_drift(config, params, EPS_SWEEP, 10_000, seed=1)
        eps = EPS_SWEEP[-1]
        predicted_scale = 0.5 * params.beta * eps * eps  # times |P dH| ~ O(1)
        assert validators.ALLOWANCE_C * eps**3 < 0.5 * predicted_scale

    def test_worker_count_does_not_change_report(self, steep_chain):
        config, params = steep_chain
        kw = dict(seed=3, proposal_kind="normalized")
        a = validators.validate_drift(config, params, EPS_SWEEP, 10_000, workers=1, **kw)
        b = validators.validate_drift(config, params, EPS_SWEEP, 10_000, workers=2, **kw)
        assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)

    @pytest.mark.parametrize(
        "eps_list,n_trials,beta",
        [
            (EPS_SWEEP, 100, 0.5),  # too few trials
            ([0.05, 0.02], 10_000, 0.5),  # too few levels for a slope
            ([0.05, -0.02, 0.01], 10_000, 0.5),  # nonpositive proposal size
            (EPS_SWEEP, 10_000, math.inf),  # no expansion at beta = inf
        ],
    )
    def test_rejects_bad_arguments(self, steep_chain, eps_list, n_trials, beta):
        config, params = steep_chain
        if beta != params.beta:
            params = ModelParams(
                model=params.model, N=params.N, dt=params.dt, beta=beta, L=params.L
            )
        with pytest.raises(ConfigError):
            validators.validate_drift(config, params, eps_list, n_trials)

    def test_unknown_proposal_kind(self, steep_chain):
        config, params = steep_chain
        with pytest.raises(ConfigError):
            validators.validate_drift(
                config, params, EPS_SWEEP, 10_000, proposal_kind="teleport"
            )


class TestValidateDiffusion:
    def test_zero_temperature_passes(self, steep_chain):
        config, params = steep_chain
        rep = validators.validate_diffusion(config, _cold(params), EPS_SWEEP, 10_000)
        assert rep["passed"]
        for lv in rep["levels"]:
            assert lv["radial_within_allowance"]
            assert lv["lag1_within_band"]

    def test_frozen_regime_passes(self, steep_chain):
        config, params = steep_chain
        rep = validators.validate_diffusion(config, params, EPS_SWEEP, 50_000, seed=0)
        assert rep["passed"]
        assert rep["residual_slope"] >= 2.7

    def test_covariance_is_rank_deficient_along_sigma(self, steep_chain):
        # radial eigenvalue O(eps^3) versus tangential eigenvalues eps^2
        config, params = steep_chain
        rep = validators.validate_diffusion(config, params, EPS_SWEEP, 20_000, seed=5)
        for lv in rep["levels"]:
            radial = max(abs(v) for v in lv["radial_eigenvalues"])
            assert radial < 0.05 * lv["eps"] ** 2

    def test_rejects_minimum_trials(self, steep_chain):
        config, params = steep_chain
        with pytest.raises(ConfigError):
            validators.validate_diffusion(config, params, EPS_SWEEP, 9_999)


class TestSphereUniformity:
    def test_circle_walk_matches_uniform_law(self):
        rep = validators.validate_sphere_uniformity(1, n_steps=200_000, seed=0)
        assert rep["passed"]
        assert list(rep["walks"]) == ["tangent"]
        np.testing.assert_allclose(rep["target_second_moment"], np.eye(2) / 2)

    def test_sphere_runs_both_projections(self):
        rep = validators.validate_sphere_uniformity(2, n_steps=200_000, seed=0)
        assert rep["passed"]
        assert set(rep["walks"]) == {"tangent", "cross"}
        assert rep["projections_indistinguishable"]
        assert rep["projection_comparison_max_z"] <= 4.0
        for walk in rep["walks"].values():
            assert walk["max_z_second"] <= 4.0

    def test_reports_are_deterministic(self):
        a = validators.validate_sphere_uniformity(1, n_steps=50_000, seed=11)
        b = validators.validate_sphere_uniformity(1, n_steps=50_000, seed=11)
        assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)

    @pytest.mark.parametrize("m", [0, 3, -1])
    def test_rejects_unsupported_dimension(self, m):
        with pytest.raises(ConfigError):
            validators.validate_sphere_uniformity(m, n_steps=50_000)

    def test_rejects_unbatchable_step_count(self):
        with pytest.raises(ConfigError):
            validators.validate_sphere_uniformity(1, n_steps=12_345)


def _fake_trajectory(params, times, energies, kind="mh"):
    times = np.asarray(times, dtype=float)
    config = make_initial_condition("aligned", params)
    return TrajectoryRecord(
        kind=kind,
        params=params,
        times=times,
        energies=np.asarray(energies, dtype=float),
        accept_rate=0.5 if kind == "mh" else None,
        snapshot_times=times[-1:],
        snapshots=config[None],
    )


class TestEnergyBound:
    # N = 10, dt = 1e-3, beta = 10 so eps^2 = N dt / beta = 1e-3
    params = ModelParams(model="xy", N=10, dt=1e-3, beta=10.0)

    def test_threshold_arithmetic(self):
        traj = _fake_trajectory(self.params, [0.0, 0.5, 1.0], [1.0, 1.05, 1.02])
        rep = validators.energy_bound_monitor(traj, self.params, b=0.1)
        eps2 = self.params.N * self.params.dt / self.params.beta
        assert rep["drift_allowance"] == pytest.approx(4.0 * 10.0 * 10.0 * eps2 * 1.0)
        assert rep["threshold"] == pytest.approx(1.0 + rep["drift_allowance"] + 0.1)
        assert not rep["exceeded"]
        assert rep["margin"] == pytest.approx(rep["threshold"] - 1.05)
        assert rep["theoretical_bound"] == pytest.approx(
            math.exp(-0.1 * 10.0 / eps2), rel=1e-12
        )

    def test_flags_exceedance(self):
        traj = _fake_trajectory(self.params, [0.0, 1.0], [1.0, 9.0])
        rep = validators.energy_bound_monitor(traj, self.params, b=0.5)
        assert rep["exceeded"]
        assert rep["margin"] < 0

    @settings(max_examples=25, deadline=None)
    @given(
        b1=st.floats(0.01, 5.0),
        extra=st.floats(0.01, 5.0),
    )
    def test_margin_grows_with_barrier(self, b1, extra):
        traj = _fake_trajectory(self.params, [0.0, 1.0], [1.0, 1.3])
        lo = validators.energy_bound_monitor(traj, self.params, b=b1)
        hi = validators.energy_bound_monitor(traj, self.params, b=b1 + extra)
        assert hi["margin"] > lo["margin"]
        assert hi["theoretical_bound"] <= lo["theoretical_bound"]

    def test_rejects_flow_trajectories_and_bad_barrier(self):
        traj = _fake_trajectory(self.params, [0.0, 1.0], [1.0, 1.0], kind="pde")
        with pytest.raises(ConfigError):
            validators.energy_bound_monitor(traj, self.params, b=1.0)
        mh = _fake_trajectory(self.params, [0.0, 1.0], [1.0, 1.0])
        with pytest.raises(ConfigError):
            validators.energy_bound_monitor(mh, self.params, b=0.0)

    def test_summary_aggregates_frequencies(self):
        def fake(exceeded, bound=0.5):
            return {
                "b": 1.0,
                "exceeded": exceeded,
                "theoretical_bound": bound,
                "margin": -1.0 if exceeded else 2.0,
            }

        rep = validators.energy_bound_summary([fake(True), fake(False), fake(False)])
        assert rep["n_realizations"] == 3
        assert rep["frequency"] == pytest.approx(1 / 3)
        assert rep["passed"]  # 1/3 < 0.5 + 4 sigma
        assert rep["min_margin"] == -1.0

        tight = [
            {"b": 1.0, "exceeded": True, "theoretical_bound": 1e-9, "margin": -1.0}
        ] * 3
        assert not validators.energy_bound_summary(tight)["passed"]

    def test_summary_rejects_empty_and_mixed_barriers(self):
        with pytest.raises(ConfigError):
            validators.energy_bound_summary([])
        a = {"b": 1.0, "exceeded": False, "theoretical_bound": 0.5, "margin": 1.0}
        b = dict(a, b=2.0)
        with pytest.raises(ConfigError):
            validators.energy_bound_summary([a, b])

    def test_short_sampled_run_stays_under_barrier(self):
        params = ModelParams(model="xy", N=10, dt=1e-3, beta=10.0 ** 1.5)
        ic = make_initial_condition("near_equilibrium", params)
        traj = run_mh(ic, params, 500, record_every=500, seed=21)
        rep = validators.energy_bound_monitor(traj, params, b=1.0)
        assert not rep["exceeded"]
        assert rep["margin"] > 0.5  # barrier sits far above typical sup H


class TestTaylorResidualSweep:
    def test_sphere_orders(self):
        rep = validators.taylor_residual_sweep(m=2)
        assert rep["passed"]
        assert rep["slopes"]["arc"] == pytest.approx(3.0, abs=0.1)
        assert rep["slopes"]["radial"] == pytest.approx(2.0, abs=0.1)
        assert rep["slopes"]["scheme_gap"] == pytest.approx(3.0, abs=0.1)

    def test_circle_orders(self):
        rep = validators.taylor_residual_sweep(m=1, seed=4)
        assert rep["passed"]

    def test_max_norms_decrease(self):
        rep = validators.taylor_residual_sweep(m=2, seed=9)
        for series in rep["max_norms"].values():
            assert series == sorted(series, reverse=True)
