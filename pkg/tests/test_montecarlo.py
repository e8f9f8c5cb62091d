"""Moment estimation, Lyapunov curves, walk statistics, asymptotic probe."""

import numpy as np
import pytest
from scipy.integrate import dblquad
from scipy.special import ive

from pamse import exact
from pamse import montecarlo as mc
from pamse.lattice import Torus, srw_kernel


@pytest.fixture
def small_params():
    return mc.ModelParams(d=1, L=6, rho=0.5, kappa=0.5, p=1)


class TestEstimateMoment:
    def test_gamma_zero_exact_one(self):
        params = mc.ModelParams(d=1, L=6, rho=0.5, kappa=0.5, p=1, gamma=0.0)
        est = mc.estimate_moment(params, 2.0, 50, 1)
        assert est.mean == 1.0 and est.stderr == 0.0

    def test_full_catalyst_exact_exponential(self):
        params = mc.ModelParams(d=1, L=6, rho=0.5, kappa=0.5, p=2)
        est = mc.estimate_moment(params, 1.5, 20, 0,
                                 initial_bits=np.ones(6, dtype=np.uint8))
        assert est.mean == pytest.approx(np.exp(2 * 1.5), rel=1e-12)
        assert est.stderr == pytest.approx(0.0, abs=1e-10)

    def test_matches_exact_semigroup(self, small_params):
        est = mc.estimate_moment(small_params, 2.0, 30_000, 9)
        spec = exact.OperatorSpec(torus=Torus(1, 6), kernel=srw_kernel(1),
                                  kappa=0.5, p=1, rho=0.5)
        target = exact.exact_moment(spec, 2.0)
        assert est.within(target, 3.0)

    def test_seed_determinism(self, small_params):
        a = mc.estimate_moment(small_params, 1.0, 500, 42)
        b = mc.estimate_moment(small_params, 1.0, 500, 42)
        assert a.mean == b.mean and a.log_mean == b.log_mean

    def test_too_few_trials_rejected(self, small_params):
        with pytest.raises(ValueError):
            mc.estimate_moment(small_params, 1.0, 1, 0)

    def test_jensen_floor(self, small_params):
        # log E exp >= E of the exponent = p rho gamma t at equilibrium
        est = mc.estimate_moment(small_params, 2.0, 5000, 3)
        floor = small_params.p * small_params.rho * 2.0
        assert est.log_mean >= floor - 4 * est.log_stderr

    def test_worker_merge_invariance(self, small_params):
        seq = mc.estimate_moment(small_params, 1.0, 400, 11, n_workers=1)
        par = mc.estimate_moment(small_params, 1.0, 400, 11, n_workers=2)
        assert seq.mean == par.mean


class TestLambdaCurve:
    def test_bounds_and_plateau(self, small_params):
        run = mc.lambda_curve(small_params, [0.5, 1.0, 2.0, 4.0], 3000, 21)
        assert run.bounds_ok()
        assert run.fit_window[1] == 4.0
        assert np.isfinite(run.plateau)

    def test_scaled_variant_consistency(self, small_params):
        # scaled value at horizon t is the plain value at t/kappa, over kappa
        t = 2.0
        kap = small_params.kappa
        scaled = mc.lambda_curve(small_params, [t, 2 * t], 2000, 5, scaled=True)
        plain = mc.lambda_curve(small_params, [t / kap, 2 * t / kap], 2000, 5)
        np.testing.assert_allclose(scaled.lambdas, plain.lambdas / kap,
                                   atol=1e-12)

    def test_bad_grid_rejected(self, small_params):
        with pytest.raises(ValueError):
            mc.lambda_curve(small_params, [2.0, 1.0], 100, 0)
        with pytest.raises(ValueError):
            mc.lambda_curve(small_params, [1.0], 100, 0)

    def test_intermittency_direction_mc(self):
        # at kappa=0 the mc curve must reproduce the exact p-ordering
        t = 4.0
        lams = []
        for p in (1, 2):
            params = mc.ModelParams(d=1, L=6, rho=0.5, kappa=0.0, p=p)
            est = mc.estimate_moment(params, t, 20_000, [88, p])
            lams.append(est.log_mean / (p * t))
        assert lams[1] > lams[0]


class TestRange:
    def test_time_zero_is_one(self):
        est = mc.range_mean(srw_kernel(2), 0.0, 20, 1)
        assert est.mean == 1.0

    def test_d1_density_decreasing(self):
        vals = [mc.range_mean(srw_kernel(1), t, 2000, 13).mean / t
                for t in (2.0, 8.0, 32.0)]
        assert vals[0] > vals[1] > vals[2]

    def test_d3_density_approaches_escape_rate(self):
        est = mc.range_mean(srw_kernel(3), 120.0, 1500, 17)
        target = 1.0 / 1.5163860591519780  # escape probability of the walk
        assert est.mean / 120.0 == pytest.approx(target, rel=0.12)


class TestBlockingBound:
    def test_time_zero(self):
        params = mc.ModelParams(d=1, L=8, rho=0.9, kappa=0.5, p=1)
        bound = mc.blocking_lower_bound(params, [(0,)], 0.0, 200, 1)
        assert bound.mc_bound == pytest.approx(1.0)

    def test_single_site_consistency(self):
        params = mc.ModelParams(d=1, L=8, rho=0.9, kappa=0.5, p=1)
        t = 1.0
        bound = mc.blocking_lower_bound(params, [(0,)], t, 4000, 3)
        est = mc.estimate_moment(params, t, 4000, 4)
        lam = est.log_mean / t
        assert np.isfinite(bound.mc_bound)
        assert bound.mc_bound <= lam + 4 * est.log_stderr / t + 0.05

    def test_catalyst_probability_floor(self):
        # rho^{E R_t |Q|} lower-bounds the full-occupancy probability
        params = mc.ModelParams(d=1, L=8, rho=0.8, kappa=0.5, p=1)
        t = 1.0
        bound = mc.blocking_lower_bound(params, [(0,)], t, 6000, 7)
        floor = params.rho ** bound.range_estimate.mean
        p_full = bound.p_catalyst_full
        assert p_full.mean >= floor - 4 * (p_full.stderr
                                           + bound.range_estimate.stderr)


class TestAsymptoticProbe:
    def test_low_dimension_rejected(self):
        with pytest.raises(ValueError):
            mc.asymptotic_probe(2, 1.0, 10.0, 10, 0)

    def test_frozen_walk_matches_quadrature(self):
        d, kappa, t = 3, 2.0, 0.8
        mine = mc.probe_frozen_value(d, kappa, t)
        oracle = dblquad(lambda u, s: float(ive(0, (u - s) / (kappa * d))) ** d,
                         0, t, lambda s: s, lambda s: t, epsabs=1e-13)[0] / t
        assert mine == pytest.approx(oracle, abs=1e-10)

    def test_frozen_walk_with_shift(self):
        d, kappa, t, shift = 4, 5.0, 0.5, 0.3
        mine = mc.probe_frozen_value(d, kappa, t, shift)
        oracle = dblquad(lambda u, s: float(ive(0, ((u - s) / kappa + shift) / d)) ** d,
                         0, t, lambda s: s, lambda s: t, epsabs=1e-13)[0] / t
        assert mine == pytest.approx(oracle, abs=1e-10)

    def test_kappa_infinity_reference(self):
        # with no shift the reference tends to G_d/(2d) as kappa grows
        from pamse.lattice import green

        _, ref = mc.asymptotic_probe(3, 1e9, 1.0, 2, 0)
        assert ref == pytest.approx(green(srw_kernel(3)) / 6.0, rel=1e-6)

    def test_short_run_near_reference(self):
        est, ref = mc.asymptotic_probe(4, 10.0, 100.0, 60, 7)
        assert abs(est.mean - ref) / ref < 0.08


def test_flat_seed_layouts():
    assert mc.flat_seed(5) == (5,)
    assert mc.flat_seed([2, [3, 4]]) == (2, 3, 4)
    a = mc.flat_seed([1, 2])
    b = mc.flat_seed((1, 2))
    assert a == b


class TestRecords:
    def test_checkpoint_export(self):
        from pamse import exclusion as ex
        from pamse.lattice import Torus, srw_kernel

        trs = Torus(1, 6)
        eta = ex.sample_initial(trs, 0.5, 3)
        sched = ex.build_schedule(trs, srw_kernel(1), 2.0, 4)
        rec = ex.export_checkpoints(ex.Trajectory(eta, sched), [0.0, 1.0, 2.0],
                                    meta={"seed": 4, "rho": 0.5})
        assert rec["meta"]["seed"] == 4
        assert rec["states"][0][1] == "".join(str(int(b)) for b in eta.bits)
        assert len(rec["states"]) == 3

    def test_jsonl_records(self, tmp_path):
        import json

        est = mc.estimate_moment(
            mc.ModelParams(d=1, L=4, rho=0.5, kappa=1.0, p=1), 0.5, 50, 8)
        path = tmp_path / "runs.jsonl"
        mc.write_records(str(path), [est.to_record(d=1, L=4, t=0.5)])
        line = json.loads(path.read_text().strip())
        assert line["n"] == 50 and line["seed"] == [8]
        assert "seconds" in line and "log_mean" in line

    def test_walker_resample_unbiased(self):
        from pamse import exact
        from pamse.lattice import Torus, srw_kernel

        params = mc.ModelParams(d=1, L=4, rho=0.5, kappa=0.5, p=1)
        est = mc.estimate_moment(params, 1.0, 8000, 77, walker_resamples=3)
        spec = exact.OperatorSpec(torus=Torus(1, 4), kernel=srw_kernel(1),
                                  kappa=0.5, p=1, rho=0.5)
        assert est.within(exact.exact_moment(spec, 1.0), 4.0)
