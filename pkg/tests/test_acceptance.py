"""Acceptance gate: one test per release criterion, each printing a
single PASS line with its headline numbers on success.
"""
import time

import numpy as np
import pytest

from neoplate.analytic_maps import (IdentityMap, MobiusMap, PinchMap,
                                    PinchParams, feasible_params, q_threshold)
from neoplate.cantor import (CantorConfig, cantor_branch_map, cantor_measure,
                             default_eps, generation)
from neoplate.energy import (EnergyParams, distortion_bound_check,
                             energy_analytic, energy_pl,
                             gradient_inequality_jacobian,
                             gradient_inequality_matrix, hopf_residual,
                             pointwise_lower_bound, sample_plmap_grid)
from neoplate.geometry import identity_map, make_rect_mesh, unit_square
from neoplate.minimizer import MinimizerConfig, init_minimizer, minimize
from neoplate.verify import branch_area_report, injectivity_count, modulus_profile


def _report(name, detail):
    print(f"PASS {name}: {detail}")


def test_criterion_1_identity_energy():
    start = time.perf_counter()
    mesh = make_rect_mesh(unit_square(), 8, 8)
    plmap = identity_map(mesh)
    e2 = energy_pl(plmap, EnergyParams(p=2.0, q=1.0)).total
    e4 = energy_pl(plmap, EnergyParams(p=4.0, q=1.0)).total
    elapsed = time.perf_counter() - start
    assert abs(e2 - 3.0) <= 1e-12
    assert abs(e4 - 5.0) <= 1e-12
    assert elapsed < 1.0
    _report("criterion 1 (identity energy)",
            f"E(p=2)={e2:.15f}, E(p=4)={e4:.15f}, {elapsed:.3f}s")


def test_criterion_2_pinch_sharpness():
    start = time.perf_counter()
    # witness quadrature converges
    witness = feasible_params(3.0, 2.0)
    rep = energy_analytic(PinchMap(witness), EnergyParams(3.0, 2.0))
    assert rep.converged and not rep.diverged
    rel_change = abs(rep.levels[-1] - rep.levels[-2]) / abs(rep.levels[-1])
    assert rel_change < 0.005

    # a + b > 1/q probe diverges with the required growth signature
    probe = PinchParams(a=-0.3, b=0.85, p=3.0, q=2.0)
    prep = energy_analytic(PinchMap(probe), EnergyParams(3.0, 2.0))
    assert prep.diverged
    assert prep.levels[-1] >= 10.0 * prep.levels[-2]

    # feasibility predicate exact on a 20x20 grid
    ps = np.linspace(2.05, 6.0, 20)
    qs = np.linspace(0.2, 8.0, 20)
    mismatches = 0
    for p in ps:
        for q in qs:
            predicted = q < q_threshold(p)
            if (feasible_params(p, q) is not None) != predicted:
                mismatches += 1
    assert mismatches == 0
    elapsed = time.perf_counter() - start
    assert elapsed < 60.0
    _report("criterion 2 (pinch sharpness)",
            f"witness rel change {rel_change:.2e}, probe growth "
            f"{prep.levels[-1] / prep.levels[-2]:.1f}x, 0/400 mismatches, "
            f"{elapsed:.2f}s")


def test_criterion_3_cantor_construction():
    start = time.perf_counter()
    cfg = CantorConfig()
    # side lengths match the closed form
    for n in range(1, 7):
        fam = generation(n, cfg)
        expected = 2.0 ** (-n) * np.prod([1.0 - default_eps(k)
                                          for k in range(1, n + 1)])
        assert all(abs(s.side - expected) <= 1e-12 for s in fam.squares)

    # measure converges above 0.47 (partial product well past depth 20)
    measure = cantor_measure(cfg, tol=1e-12)
    assert measure > 0.47

    # exact fixed points on 10^4 samples of the depth-5 cornersquares
    witness = feasible_params(3.0, 2.0)
    rep = branch_area_report(cfg, witness, depth=20, samples=10_000,
                             seed=0, map_depth=5)
    assert rep.fixed_point_failures == 0

    # a collapsed pair in every generation-1 centersquare
    assert len(rep.witness_pairs) >= 1
    bmap = cantor_branch_map(cfg, witness, 1)
    for p1, p2, img in rep.witness_pairs:
        assert not np.array_equal(p1, p2)
        assert np.allclose(bmap.eval(p1), bmap.eval(p2), atol=1e-14)
    elapsed = time.perf_counter() - start
    assert elapsed < 10.0
    _report("criterion 3 (cantor construction)",
            f"measure {measure:.5f}, 0/10000 fixed-point failures, "
            f"{len(rep.witness_pairs)} witness pair(s), {elapsed:.2f}s")


def test_criterion_4_minimizer_identity_target():
    start = time.perf_counter()
    params = EnergyParams(p=2.0, q=1.0)
    mesh = make_rect_mesh(unit_square(), 16, 16)
    feasible_mins = []
    state = init_minimizer(mesh, unit_square(), initial="identity",
                           perturb_sigma=0.05, seed=7, params=params)
    state, report = minimize(
        state, MinimizerConfig(params=params),
        callback=lambda st, g: feasible_mins.append(
            float(st.plmap.image_signed_areas().min())))
    assert all(m > 0 for m in feasible_mins)          # all iterates feasible
    hist = np.array(state.energy_history)
    assert np.all(np.diff(hist) < 0)                  # monotone decrease
    assert 3.0 - 1e-9 <= report.final_energy <= 3.02
    deviation = float(np.max(np.abs(state.plmap.target - mesh.vertices)))
    assert deviation <= 0.02
    elapsed = time.perf_counter() - start
    assert elapsed < 60.0
    _report("criterion 4 (minimizer, X=Y)",
            f"final energy {report.final_energy:.12f}, deviation "
            f"{deviation:.2e}, {report.iterations} iters, {elapsed:.2f}s")


def test_criterion_5_inequality_suites():
    start = time.perf_counter()
    n = 100_000
    rng = np.random.default_rng(2024)

    def posdet(count):
        out = []
        have = 0
        while have < count:
            A = rng.normal(size=(count, 2, 2))
            det = A[:, 0, 0] * A[:, 1, 1] - A[:, 0, 1] * A[:, 1, 0]
            flip = det < 0
            A[flip] = A[flip][:, ::-1, :]  # row swap restores orientation
            A = A[np.abs(det) > 1e-3]      # stay off the degenerate cone
            out.append(A)
            have += len(A)
        return np.concatenate(out)[:count]

    A = posdet(n)
    A0 = posdet(n)
    p_draws = rng.uniform(2.0, 6.0, n)
    worst = np.inf
    for p in np.unique(np.round(p_draws, 1)):
        sel = np.round(p_draws, 1) == p
        worst = min(worst, float(np.min(pointwise_lower_bound(A[sel], p))))
        worst = min(worst, float(np.min(
            gradient_inequality_matrix(A[sel], A0[sel], p))))
    assert worst >= -1e-12

    J = rng.uniform(0.05, 10.0, n)
    J0 = rng.uniform(0.05, 10.0, n)
    q = rng.uniform(0.2, 5.0)
    res_j = gradient_inequality_jacobian(J, J0, q)
    assert float(np.min(res_j)) >= -1e-12

    res_d = distortion_bound_check(posdet(n), EnergyParams(4.0, 2.0))
    assert float(np.min(res_d)) >= -1e-12
    elapsed = time.perf_counter() - start
    assert elapsed < 10.0
    _report("criterion 5 (inequality suites)",
            f"4x{n} instances, worst residual {min(worst, float(np.min(res_j)), float(np.min(res_d))):.2e}, "
            f"{elapsed:.2f}s")


def test_criterion_6_hopf_residual():
    n = 33
    xs = np.linspace(0.0, 1.0, n)
    h = xs[1] - xs[0]
    X, Y = np.meshgrid(xs, xs, indexing="ij")

    # identity and an affine map: both conventions identically zero
    worst = 0.0
    for W in (X + 1j * Y,
              (2.0 * X + 0.25 * Y) + 1j * (0.125 * X + 1.5 * Y)):
        for params in (EnergyParams(2.0, 1.0), EnergyParams(3.0, 2.0)):
            fields = hopf_residual(W, params, h)
            worst = max(worst, fields.norm_eq, fields.norm_conj)
    assert worst <= 1e-14

    # minimizer outputs across 3 refinements: norms reported only
    params = EnergyParams(2.0, 1.0)
    norms = []
    for cells in (8, 16, 32):
        mesh = make_rect_mesh(unit_square(), cells, cells)
        state = init_minimizer(mesh, unit_square(), initial="identity",
                               perturb_sigma=0.03, seed=3, params=params)
        state, _ = minimize(state, MinimizerConfig(params=params,
                                                   max_iters=300))
        W, spacing = sample_plmap_grid(state.plmap, cells + 1)
        fields = hopf_residual(W, params, spacing)
        norms.append((cells, fields.norm_eq, fields.norm_conj))
    detail = ", ".join(f"{c}x{c}: eq={a:.3e} conj={b:.3e}"
                       for c, a, b in norms)
    _report("criterion 6 (hopf residual)",
            f"affine worst {worst:.1e}; minimizer norms {detail}")


def test_criterion_7_mobius():
    start = time.perf_counter()
    aks = (0.1, 0.5, 0.9)
    dirichlet = []
    for ak in aks:
        rep = energy_analytic(MobiusMap(ak), EnergyParams(2.0, 1.0))
        assert abs(rep.gradient_term - 2.0 * np.pi) <= 1e-4
        dirichlet.append(rep.gradient_term)

    constants = [modulus_profile(MobiusMap(ak), pair_samples=20000,
                                 seed=3, dirichlet=d).fitted_constant
                 for ak, d in zip(aks, dirichlet)]
    assert constants[0] < constants[1] < constants[2]
    elapsed = time.perf_counter() - start
    _report("criterion 7 (mobius)",
            f"max |Dirichlet - 2pi| {max(abs(d - 2 * np.pi) for d in dirichlet):.2e}, "
            f"C = {constants[0]:.3f} < {constants[1]:.3f} < {constants[2]:.3f}, "
            f"{elapsed:.2f}s")


def test_criterion_8_injectivity_histogram():
    hist_id = injectivity_count(IdentityMap(), 512, 64)
    assert hist_id.fraction_N1 == 1.0

    witness = feasible_params(3.0, 2.0)
    details = []
    for name, amap in (("pinch", PinchMap(witness)),
                       ("cantor", cantor_branch_map(CantorConfig(),
                                                    witness, 3))):
        base = injectivity_count(amap, 512, 64)
        doubled = injectivity_count(amap, 1024, 128)
        assert base.fraction_N1 >= 0.99
        assert doubled.fraction_N1 >= base.fraction_N1 - 1e-12
        details.append(f"{name}: {base.fraction_N1:.4f} -> "
                       f"{doubled.fraction_N1:.4f}")
    _report("criterion 8 (injectivity histogram)",
            f"identity 1.0000, {', '.join(details)}")
