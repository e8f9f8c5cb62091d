"""Independent walks, product-formula functionals, exclusion comparison."""

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.sparse.linalg import expm_multiply

from pamse import exact, irw
from pamse.fields import Region
from pamse.lattice import Torus, srw_kernel, torus_heat_matrix


@pytest.fixture
def ring6():
    return Torus(1, 6), srw_kernel(1)


def joint_chain_value(torus, kernel, occ_sites, slices, t):
    """Oracle: exponential functional on the full multi-particle chain."""
    p = len(occ_sites)
    if p == 0:
        return 1.0
    n = torus.n_sites
    lap = Region(torus).generator(kernel)
    gen = sp.csr_matrix((n**p, n**p))
    for i in range(p):
        gen = gen + sp.kron(sp.kron(sp.identity(n**i), lap),
                            sp.identity(n ** (p - 1 - i)))
    idx = np.arange(n**p)
    v = np.ones(n**p)
    for t0, t1, vals in reversed(slices):
        dt = min(t1, t) - t0
        if dt <= 0:
            continue
        diag = np.zeros(n**p)
        for i in range(p):
            x_i = (idx // n ** (p - 1 - i)) % n
            diag += vals[x_i]
        v = expm_multiply((gen + sp.diags(diag)).tocsr() * dt, v)
    start = 0
    for s in occ_sites:
        start = start * n + s
    return float(v[start])


class TestEnsemble:
    def test_start_positions(self, ring6):
        trs, k = ring6
        ens = irw.sample_walks(trs, k, [0, 0, 3], 2.0, 1)
        counts = irw.evolve_irw(ens, 0.0)
        assert counts[0] == 2 and counts[3] == 1

    def test_count_conserved(self, ring6):
        trs, k = ring6
        ens = irw.sample_walks(trs, k, [0, 2, 2, 5], 4.0, 9)
        for t in (0.5, 2.0, 4.0):
            assert irw.evolve_irw(ens, t).sum() == 4

    def test_multiplicities_allowed(self, ring6):
        trs, k = ring6
        for seed in range(50):
            ens = irw.sample_walks(trs, k, [0, 1], 3.0, seed)
            if irw.evolve_irw(ens, 3.0).max() > 1:
                return
        pytest.fail("independent walks never collided")

    def test_single_particle_marginal(self, ring6):
        trs, k = ring6
        t = 1.5
        n = 20_000
        counts = np.zeros(6)
        for i in range(n):
            ens = irw.sample_walks(trs, k, [2], t, [17, i])
            counts += irw.evolve_irw(ens, t)
        target = torus_heat_matrix(trs, k, t)[2]
        for s in range(6):
            p_hat = counts[s] / n
            sigma = np.sqrt(max(target[s] * (1 - target[s]), 1e-12) / n)
            assert abs(p_hat - target[s]) <= 4 * sigma


class TestWeightFunction:
    def test_mixed_sign_rejected(self):
        with pytest.raises(ValueError):
            irw.WeightFunction((((0,), (0.0, 1.0), 1.0),
                                ((1,), (0.0, 1.0), -1.0)))

    def test_bad_interval_rejected(self):
        with pytest.raises(ValueError):
            irw.WeightFunction((((0,), (1.0, 0.5), 1.0),))

    def test_slices_partition(self):
        K = irw.WeightFunction((((0,), (0.0, 1.0), 2.0),
                                ((1,), (0.5, 1.5), 1.0)))
        trs = Torus(1, 4)
        slices = K.time_slices(trs)
        assert [(a, b) for a, b, _ in slices] == [(0.0, 0.5), (0.5, 1.0), (1.0, 1.5)]
        assert slices[1][2][0] == 2.0 and slices[1][2][1] == 1.0

    @settings(max_examples=30, deadline=None)
    @given(st.floats(0.1, 3.0), st.floats(-2.0, 2.0))
    def test_total_mass(self, t1, val):
        K = irw.WeightFunction((((0,), (0.0, t1), val),))
        assert K.total_mass() == pytest.approx(abs(val) * t1)


class TestProductFormula:
    def test_zero_weight_gives_one(self, ring6):
        trs, k = ring6
        K = irw.WeightFunction((((0,), (0.0, 1.0), 0.0),))
        assert irw.irw_exp_functional(0.5, K, 1.0, trs, k) == pytest.approx(1.0)

    def test_vanishing_density_limit(self, ring6):
        trs, k = ring6
        K = irw.WeightFunction((((0,), (0.0, 1.0), 1.0),))
        vals = [irw.irw_exp_functional(rho, K, 1.0, trs, k)
                for rho in (0.1, 0.01, 0.001)]
        assert vals[0] > vals[1] > vals[2]
        assert vals[2] == pytest.approx(1.0, abs=5e-3)

    def test_against_joint_chain_oracle(self, ring6):
        trs, k = ring6
        K = irw.WeightFunction((((0,), (0.0, 1.0), 1.0),))
        slices = K.time_slices(trs)
        bits = exact.occupation_bits(6)
        weights = exact.nu_weights(6, 0.5)
        oracle = sum(w * joint_chain_value(trs, k, list(np.nonzero(b)[0]),
                                           slices, 1.0)
                     for w, b in zip(weights, bits))
        mine = irw.irw_exp_functional(0.5, K, 1.0, trs, k)
        assert mine == pytest.approx(oracle, abs=1e-8)

    def test_eta_start_against_oracle(self, ring6):
        trs, k = ring6
        K = irw.WeightFunction((((0,), (0.0, 1.0), -1.0),))
        eta = np.array([1, 1, 0, 0, 1, 0], dtype=np.uint8)
        oracle = joint_chain_value(trs, k, [0, 1, 4], K.time_slices(trs), 1.0)
        mine = irw.irw_exp_functional_eta(eta, K, 1.0, trs, k)
        assert mine == pytest.approx(oracle, abs=1e-10)

    def test_time_dependent_weight(self, ring6):
        trs, k = ring6
        K = irw.WeightFunction((((0,), (0.0, 0.5), 1.0),
                                ((2,), (0.5, 1.0), 0.5)))
        eta = np.array([1, 0, 1, 0, 0, 0], dtype=np.uint8)
        oracle = joint_chain_value(trs, k, [0, 2], K.time_slices(trs), 1.0)
        mine = irw.irw_exp_functional_eta(eta, K, 1.0, trs, k)
        assert mine == pytest.approx(oracle, abs=1e-10)


class TestComparison:
    def test_zero_weight_margin_zero(self, ring6):
        trs, k = ring6
        K = irw.WeightFunction((((0,), (0.0, 1.0), 0.0),))
        rep = irw.compare_se_irw(trs, k, 0.5, K, 1.0)
        assert rep.se_value == pytest.approx(1.0)
        assert rep.margin == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("value", [1.0, -1.0])
    def test_point_weight_margins(self, ring6, value):
        trs, k = ring6
        K = irw.WeightFunction((((0,), (0.0, 1.0), value),))
        rep = irw.compare_se_irw(trs, k, 0.5, K, 1.0)
        assert rep.margin >= -1e-10
        assert not rep.violation

    @pytest.mark.parametrize("rho", [0.3, 0.7])
    @pytest.mark.parametrize("value", [1.0, -1.0])
    def test_per_eta_comparison(self, ring6, rho, value):
        # the ordering holds from every deterministic start, not just averaged
        trs, k = ring6
        K = irw.WeightFunction((((0,), (0.0, 1.0), value),))
        rng = np.random.default_rng(7)
        for _ in range(8):
            eta = (rng.random(6) < rho).astype(np.uint8)
            rep = irw.compare_se_irw(trs, k, eta, K, 1.0)
            assert rep.margin >= -1e-10

    def test_serialized_record(self, ring6):
        trs, k = ring6
        K = irw.WeightFunction((((0,), (0.0, 1.0), 1.0),))
        rec = irw.compare_se_irw(trs, k, 0.5, K, 1.0).to_record()
        assert {"se_value", "irw_value", "margin", "se_method",
                "irw_method"} <= set(rec)

    def test_mc_fallback_branch(self):
        trs = Torus(1, 6)
        k = srw_kernel(1)
        K = irw.WeightFunction((((0,), (0.0, 0.5), 1.0),))
        rep = irw.compare_se_irw(trs, k, 0.5, K, 0.5, exact_cap=4,
                                 mc_trials=4000, seed=2)
        assert rep.se_method.startswith("mc")
        assert not rep.violation


class TestLandimSpotCheck:
    def test_fixed_time_exponential_ordering(self):
        """E_eta exp[r sum_j xi_{s_j}(z_j)] <= IRW analogue on a grid of r
        spanning both signs (tiny system, exact two-sided evaluation)."""
        trs = Torus(1, 4)
        k = srw_kernel(1)
        pairs = [(1, 0.4), (3, 0.9)]  # (site, time), increasing times
        bits = exact.occupation_bits(4).astype(float)
        gen_se = exact.build_se_generator(trs, k)
        lap = Region(trs).generator(k)
        eta = np.array([1, 0, 1, 0], dtype=np.uint8)
        eta_idx = int(np.sum(eta << np.arange(4)))

        for r in (-1.5, -0.5, 0.5, 1.0, 2.0):
            # exclusion side: interleave semigroup flow and multiplications
            f = np.ones(16)
            t_prev = pairs[-1][1]
            for site, s in reversed(pairs):
                if t_prev > s:
                    f = expm_multiply(gen_se * (t_prev - s), f)
                f = f * np.exp(r * bits[:, site])
                t_prev = s
            if t_prev > 0:
                f = expm_multiply(gen_se * t_prev, f)
            se_val = float(f[eta_idx])

            # IRW side: per-particle factorization with the same interleaving
            vals = []
            for x0 in range(4):
                h = np.ones(4)
                t_prev = pairs[-1][1]
                for site, s in reversed(pairs):
                    if t_prev > s:
                        h = expm_multiply(lap * (t_prev - s), h)
                    ind = np.zeros(4)
                    ind[site] = 1.0
                    h = h * np.exp(r * ind)
                    t_prev = s
                if t_prev > 0:
                    h = expm_multiply(lap * t_prev, h)
                vals.append(float(h[x0]))
            irw_val = float(np.prod([vals[x] for x in (0, 2)]))
            assert se_val <= irw_val + 1e-12


class TestStationaryMarginal:
    def test_density_preserved_from_product_start(self):
        trs = Torus(1, 6)
        k = srw_kernel(1)
        t = 1.3
        n = 6000
        total = 0
        rng = np.random.default_rng(5)
        for i in range(n):
            starts = np.nonzero(rng.random(6) < 0.4)[0]
            if len(starts) == 0:
                continue
            ens = irw.sample_walks(trs, k, starts, t, [71, i])
            total += int(irw.evolve_irw(ens, t)[2])
        mean = total / n
        sigma = np.sqrt(0.4 / n) * 2  # counts can exceed 1; crude envelope
        assert abs(mean - 0.4) <= 4 * sigma


class TestOverflowFlag:
    def test_divergent_single_walk_flagged(self, ring6):
        trs, k = ring6
        # strong positive weight over a long horizon overflows the
        # single-walk solution and must be reported, not silently returned
        K = irw.WeightFunction((((0,), (0.0, 400.0), 4.0),))
        with pytest.raises(OverflowError):
            irw.irw_exp_functional(0.5, K, 400.0, trs, k)


class TestWeightHorizonEdges:
    def test_weight_ending_before_horizon(self, ring6):
        import scipy.sparse as sp
        from scipy.sparse.linalg import expm_multiply
        from pamse.fields import Region

        trs, k = ring6
        K = irw.WeightFunction((((0,), (0.0, 0.5), 1.0),))
        v = irw.single_walk_values(trs, k, K, 1.2)
        gen = Region(trs).generator(k)
        d = np.zeros(6)
        d[0] = 1.0
        manual = expm_multiply((gen + sp.diags(d)).tocsr() * 0.5,
                               expm_multiply(gen * 0.7, np.ones(6)))
        np.testing.assert_allclose(v, manual, atol=1e-12)

    def test_weight_clipped_at_horizon(self, ring6):
        import scipy.sparse as sp
        from scipy.sparse.linalg import expm_multiply
        from pamse.fields import Region

        trs, k = ring6
        K = irw.WeightFunction((((0,), (0.0, 5.0), 1.0),))
        v = irw.single_walk_values(trs, k, K, 0.8)
        gen = Region(trs).generator(k)
        d = np.zeros(6)
        d[0] = 1.0
        manual = expm_multiply((gen + sp.diags(d)).tocsr() * 0.8, np.ones(6))
        np.testing.assert_allclose(v, manual, atol=1e-12)
