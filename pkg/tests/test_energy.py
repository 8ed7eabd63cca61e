import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from neoplate.analytic_maps import (AffineMap, IdentityMap, MobiusMap,
                                    ModelPhi, PinchMap, PinchParams,
                                    feasible_params, rescale_map)
from neoplate.energy import (EnergyParams, QuadratureSpec,
                             complex_derivatives, distortion_bound_check,
                             energy_analytic, energy_pl,
                             gradient_inequality_jacobian,
                             gradient_inequality_matrix, hopf_residual,
                             identity_energy, pointwise_lower_bound)
from neoplate.geometry import PLMap, Rect, identity_map, make_rect_mesh, unit_square

WITNESS = feasible_params(3.0, 2.0)


def random_posdet_matrices(rng, n):
    A = rng.normal(size=(n, 2, 2))
    det = A[:, 0, 0] * A[:, 1, 1] - A[:, 0, 1] * A[:, 1, 0]
    flip = det < 0
    A[flip, 0], A[flip, 1] = A[flip, 1].copy(), A[flip, 0].copy()
    det = np.abs(det)
    keep = det > 1e-3
    return A[keep]


class TestEnergyParams:
    def test_gates(self):
        with pytest.raises(ValueError):
            EnergyParams(p=1.0, q=1.0)
        with pytest.raises(ValueError):
            EnergyParams(p=2.0, q=0.0)

    def test_homeo_regime(self):
        assert EnergyParams(p=3.0, q=3.0).homeo_regime
        assert not EnergyParams(p=3.0, q=2.0).homeo_regime
        assert not EnergyParams(p=2.0, q=5.0).homeo_regime


class TestEnergyPL:
    def test_identity_unit_square(self):
        mesh = make_rect_mesh(unit_square(), 4, 4)
        rep = energy_pl(identity_map(mesh), EnergyParams(2.0, 1.0))
        assert abs(rep.total - 3.0) <= 1e-12
        rep4 = energy_pl(identity_map(mesh), EnergyParams(4.0, 1.0))
        assert abs(rep4.total - 5.0) <= 1e-12

    def test_uniform_scaling(self):
        # gradient 2I: |A|^2 = 8, det = 4, integrand 8 + 1/4 over unit area
        mesh = make_rect_mesh(unit_square(), 3, 3)
        plmap = PLMap(mesh, 2.0 * mesh.vertices)
        rep = energy_pl(plmap, EnergyParams(2.0, 1.0))
        assert rep.total == pytest.approx(8.25, abs=1e-12)

    def test_flip_names_triangle(self):
        mesh = make_rect_mesh(unit_square(), 1, 1)
        target = mesh.vertices.copy()
        target[:, 0] = -target[:, 0]
        with pytest.raises(ValueError, match="triangle"):
            energy_pl(PLMap(mesh, target), EnergyParams(2.0, 1.0))

    def test_distortion_at_least_area(self):
        mesh = make_rect_mesh(unit_square(), 4, 4)
        rng = np.random.default_rng(0)
        target = mesh.vertices + 0.02 * rng.uniform(-1, 1, mesh.vertices.shape)
        rep = energy_pl(PLMap(mesh, target), EnergyParams(2.0, 1.0))
        assert rep.distortion_integral >= 1.0 - 1e-12


class TestEnergyAnalytic:
    def test_identity_any_rect(self):
        rect = Rect(0.0, 2.0, -1.0, 1.0)
        for p in (2.0, 3.0, 4.0):
            rep = energy_analytic(IdentityMap(rect), EnergyParams(p, 1.0))
            assert abs(rep.total - identity_energy(rect.area,
                                                   EnergyParams(p, 1.0))) <= 1e-10

    def test_pinch_witness_converges(self):
        rep = energy_analytic(PinchMap(WITNESS), EnergyParams(3.0, 2.0))
        assert rep.converged and not rep.diverged
        assert rep.total > 0
        assert abs(rep.levels[-1] - rep.levels[-2]) < 0.005 * rep.levels[-1]

    def test_pinch_probe_diverges(self):
        probe = PinchParams(a=-0.3, b=0.85, p=3.0, q=2.0)
        rep = energy_analytic(PinchMap(probe), EnergyParams(3.0, 2.0))
        assert rep.diverged and not rep.converged
        assert rep.levels[-1] >= 10.0 * rep.levels[-2]

    def test_matches_energy_pl_for_affine(self):
        M = np.array([[1.5, 0.2], [-0.1, 0.8]])
        amap = AffineMap(M, domain=unit_square())
        rep_a = energy_analytic(amap, EnergyParams(3.0, 2.0))
        mesh = make_rect_mesh(unit_square(), 2, 2)
        rep_pl = energy_pl(PLMap(mesh, mesh.vertices @ M.T),
                           EnergyParams(3.0, 2.0))
        assert abs(rep_a.total - rep_pl.total) <= 1e-10

    def test_mobius_dirichlet(self):
        for ak in (0.1, 0.5, 0.9):
            rep = energy_analytic(MobiusMap(ak), EnergyParams(2.0, 1.0))
            assert abs(rep.gradient_term - 2.0 * np.pi) <= 1e-4

    def test_rescaling_preserves_average_energy(self):
        phi = ModelPhi(WITNESS)
        params = EnergyParams(3.0, 2.0)
        rep_phi = energy_analytic(phi, params)
        scaled = rescale_map(phi, (0.5, 0.5), 0.25)
        rep_sc = energy_analytic(scaled, params)
        avg_phi = rep_phi.total / phi.domain.area
        avg_sc = rep_sc.total / scaled.domain.area
        assert abs(avg_phi - avg_sc) <= 1e-3 * avg_phi

    def test_divergence_straddle(self):
        # converged iff a + b < 1/q, probed at +-0.05 around the boundary
        p, q = 3.0, 2.0
        for delta, expect_converged in ((-0.05, True), (0.05, False)):
            b = 0.7  # keeps b > 1 - 1/p = 2/3
            params = PinchParams(a=1.0 / q + delta - b, b=b, p=p, q=q)
            rep = energy_analytic(PinchMap(params), EnergyParams(p, q))
            assert rep.converged == expect_converged
            assert rep.diverged == (not expect_converged)


class TestIdentityEnergy:
    def test_pinned_values(self):
        assert identity_energy(1.0, EnergyParams(2.0, 1.0)) == 3.0
        assert identity_energy(8.0, EnergyParams(2.0, 1.0)) == 24.0
        assert identity_energy(1.0, EnergyParams(6.0, 1.0)) == 9.0

    def test_area_gate(self):
        with pytest.raises(ValueError):
            identity_energy(0.0, EnergyParams(2.0, 1.0))


class TestPointwiseLowerBound:
    def test_identity_equality(self):
        assert pointwise_lower_bound(np.eye(2), 2.0) == pytest.approx(0.0, abs=1e-14)

    def test_pinned_value(self):
        A = np.diag([2.0, 0.5])
        assert pointwise_lower_bound(A, 2.0) == pytest.approx(2.25, abs=1e-13)

    def test_gates(self):
        with pytest.raises(ValueError):
            pointwise_lower_bound(np.eye(2), 1.5)
        with pytest.raises(ValueError):
            pointwise_lower_bound(np.diag([1.0, -1.0]), 2.0)

    @settings(max_examples=100)
    @given(st.floats(2.0, 6.0), st.integers(0, 2 ** 31 - 1))
    def test_random_nonnegative(self, p, seed):
        A = random_posdet_matrices(np.random.default_rng(seed), 16)
        if len(A):
            assert np.all(pointwise_lower_bound(A, p) >= -1e-12)


class TestGradientInequalities:
    def test_equality_at_base(self):
        A = np.array([[1.3, 0.2], [0.0, 0.9]])
        assert gradient_inequality_matrix(A, A, 3.0) == pytest.approx(0.0, abs=1e-13)
        assert gradient_inequality_jacobian(1.7, 1.7, 2.0) == pytest.approx(0.0)

    def test_pinned_values(self):
        assert gradient_inequality_matrix(2 * np.eye(2), np.eye(2), 2.0) == \
            pytest.approx(2.0, abs=1e-13)
        assert gradient_inequality_jacobian(2.0, 1.0, 1.0) == pytest.approx(0.5)

    def test_gates(self):
        with pytest.raises(ValueError):
            gradient_inequality_matrix(np.eye(2), np.eye(2), 1.5)
        with pytest.raises(ValueError):
            gradient_inequality_jacobian(-1.0, 1.0, 1.0)
        with pytest.raises(ValueError):
            gradient_inequality_jacobian(1.0, 1.0, 0.0)

    @settings(max_examples=50)
    @given(st.floats(0.01, 10.0), st.floats(0.01, 10.0), st.floats(0.1, 5.0))
    def test_jacobian_convexity(self, J, J0, q):
        assert gradient_inequality_jacobian(J, J0, q) >= -1e-12


class TestDistortionBound:
    def test_identity_pinned(self):
        assert distortion_bound_check(np.eye(2), EnergyParams(4.0, 2.0)) == \
            pytest.approx(4.0, abs=1e-13)

    def test_regime_gate(self):
        with pytest.raises(ValueError):
            distortion_bound_check(np.eye(2), EnergyParams(2.5, 2.0))

    def test_random_nonnegative(self):
        A = random_posdet_matrices(np.random.default_rng(21), 2000)
        res = distortion_bound_check(A, EnergyParams(4.0, 2.0))
        assert np.all(res >= -1e-12)


class TestComplexDerivatives:
    def grid(self, n=21):
        xs = np.linspace(0.0, 1.0, n)
        X, Y = np.meshgrid(xs, xs, indexing="ij")
        return X, Y, xs[1] - xs[0]

    def test_identity(self):
        X, Y, h = self.grid()
        hz, hzb = complex_derivatives(X + 1j * Y, h)
        assert np.allclose(hz, 1.0, atol=1e-13)
        assert np.allclose(hzb, 0.0, atol=1e-13)

    def test_conjugate(self):
        X, Y, h = self.grid()
        hz, hzb = complex_derivatives(X - 1j * Y, h)
        assert np.allclose(hz, 0.0, atol=1e-13)
        assert np.allclose(hzb, 1.0, atol=1e-13)

    def test_z_squared_second_order(self):
        errs = []
        for n in (11, 21, 41):
            X, Y, h = self.grid(n)
            Z = X + 1j * Y
            hz, _ = complex_derivatives(Z * Z, h)
            errs.append(np.max(np.abs(hz - 2 * Z[1:-1, 1:-1])))
        # central differences of z^2 are exact up to rounding
        assert max(errs) <= 1e-12

    def test_gates(self):
        with pytest.raises(ValueError):
            complex_derivatives(np.zeros((2, 2), complex), 0.1)
        with pytest.raises(ValueError):
            complex_derivatives(np.zeros((5, 5), complex), 0.0)


class TestHopfResidual:
    def grid(self, n=33):
        xs = np.linspace(0.0, 1.0, n)
        X, Y = np.meshgrid(xs, xs, indexing="ij")
        return X, Y, xs[1] - xs[0]

    def test_identity_zero(self):
        X, Y, h = self.grid()
        fields = hopf_residual(X + 1j * Y, EnergyParams(3.0, 2.0), h)
        assert fields.norm_eq <= 1e-14
        assert fields.norm_conj <= 1e-14

    def test_affine_zero(self):
        X, Y, h = self.grid()
        M = np.array([[2.0, 0.25], [0.125, 1.5]])  # dyadic: exact arithmetic
        W = (M[0, 0] * X + M[0, 1] * Y) + 1j * (M[1, 0] * X + M[1, 1] * Y)
        for params in (EnergyParams(2.0, 1.0), EnergyParams(3.0, 2.0)):
            fields = hopf_residual(W, params, h)
            assert fields.norm_eq <= 1e-14
            assert fields.norm_conj <= 1e-14

    def test_orientation_gate(self):
        X, Y, h = self.grid(9)
        with pytest.raises(ValueError, match="jacobian"):
            hopf_residual(X - 1j * Y, EnergyParams(2.0, 1.0), h)
