"""Mesh, quadrature, assembly and interpolation, checked against independent oracles."""
import numpy as np
import pytest
import scipy.sparse.linalg as spla

from movingbeam import (
    BeamParameters,
    HermiteSpace,
    ManufacturedCase,
    Mesh,
    MovingBoundary,
    assemble_constant,
    assemble_load,
    assemble_time_dependent,
    eval_coefficients,
    gauss_rule,
    interpolate_initial,
)
from movingbeam.fem import _elem_integrals


class TestQuadrature:
    def test_monomial_exactness(self):
        pts, w = gauss_rule(1, 4)
        assert float(w @ pts[:, 0] ** 3) == pytest.approx(0.25, abs=1e-15)
        assert float(w @ pts[:, 0] ** 7) == pytest.approx(0.125, abs=1e-15)
        assert float(w.sum()) == pytest.approx(1.0, abs=1e-15)

    def test_2d_tensor_rule(self):
        pts, w = gauss_rule(2, 3)
        assert pts.shape == (9, 2)
        assert float(w.sum()) == pytest.approx(1.0, abs=1e-14)
        # separable monomial
        val = float(w @ (pts[:, 0] ** 2 * pts[:, 1] ** 4))
        assert val == pytest.approx((1 / 3) * (1 / 5), abs=1e-15)

    def test_bad_rule(self):
        with pytest.raises(ValueError):
            gauss_rule(1, 0)
        with pytest.raises(ValueError):
            gauss_rule(3, 2)


def _symbolic_element_matrices(L):
    """Exact 1D element mass/K1/K2 for cell size L (closed forms)."""
    M = L / 420.0 * np.array(
        [
            [156, 22 * L, 54, -13 * L],
            [22 * L, 4 * L * L, 13 * L, -3 * L * L],
            [54, 13 * L, 156, -22 * L],
            [-13 * L, -3 * L * L, -22 * L, 4 * L * L],
        ]
    )
    K1 = 1.0 / (30 * L) * np.array(
        [
            [36, 3 * L, -36, 3 * L],
            [3 * L, 4 * L * L, -3 * L, -L * L],
            [-36, -3 * L, 36, -3 * L],
            [3 * L, -L * L, -3 * L, 4 * L * L],
        ]
    )
    K2 = 1.0 / L**3 * np.array(
        [
            [12, 6 * L, -12, 6 * L],
            [6 * L, 4 * L * L, -6 * L, 2 * L * L],
            [-12, -6 * L, 12, -6 * L],
            [6 * L, 2 * L * L, -6 * L, 4 * L * L],
        ]
    )
    return M, K1, K2


class TestConstantAssembly:
    def test_element_matrices_match_closed_forms(self):
        L = 0.7
        space = HermiteSpace(Mesh(1, ((0.0, L),), (1,)))
        tab = space.basis_tables(5)
        ones = np.ones((1, tab["w"].size))
        Me = _elem_integrals(space, 5, ones, tab["N"], tab["N"])[0]
        K1e = _elem_integrals(space, 5, ones, tab["grad"][:, :, 0], tab["grad"][:, :, 0])[0]
        K2e = _elem_integrals(space, 5, ones, tab["lap"], tab["lap"])[0]
        Ms, K1s, K2s = _symbolic_element_matrices(L)
        np.testing.assert_allclose(Me, Ms, rtol=1e-13)
        np.testing.assert_allclose(K1e, K1s, rtol=1e-13)
        np.testing.assert_allclose(K2e, K2s, rtol=1e-13)
        # the spec's landmark entries
        assert Me[0, 0] == pytest.approx(13 * L / 35, rel=1e-14)
        assert K2e[0, 0] == pytest.approx(12 / L**3, rel=1e-14)

    def test_symmetry_and_spd(self, space_1d_coarse):
        ops = assemble_constant(space_1d_coarse)
        for M in (ops.A, ops.K1, ops.K2):
            d = (M - M.T).toarray()
            assert np.max(np.abs(d)) < 1e-15 * np.max(np.abs(M.toarray()))
        lam_min = spla.eigsh(ops.A, k=1, which="SA", return_eigenvectors=False)[0]
        assert lam_min > 0.0
        lam_min_k2 = spla.eigsh(ops.K2, k=1, sigma=0, return_eigenvectors=False)[0]
        assert lam_min_k2 > 0.0

    def test_2d_element_against_brute_force_quadrature(self, space_2d_coarse):
        # oracle: 12-point tensor rule, independent of the default 5-point one
        ops5 = assemble_constant(space_2d_coarse, nq=5)
        ops12 = assemble_constant(space_2d_coarse, nq=12)
        for a, b in ((ops5.A, ops12.A), (ops5.K1, ops12.K1), (ops5.K2, ops12.K2)):
            da, db = a.toarray(), b.toarray()
            assert np.max(np.abs(da - db)) < 1e-12 * max(1.0, np.max(np.abs(db)))

    def test_determinism_bitwise(self, space_2d_coarse):
        o1 = assemble_constant(space_2d_coarse)
        o2 = assemble_constant(space_2d_coarse)
        for a, b in ((o1.A, o2.A), (o1.K1, o2.K1), (o1.K2, o2.K2)):
            assert np.array_equal(a.data, b.data)
            assert np.array_equal(a.indices, b.indices)

    def test_bandwidth_metadata(self, space_1d_coarse):
        ops = assemble_constant(space_1d_coarse)
        assert ops.bandwidth == 3  # 1D Hermite couples 4 consecutive free DOFs


class TestTimeDependentAssembly:
    def test_stationary_degeneration(self, params):
        b = MovingBoundary.constant(64.0)
        space = HermiteSpace(Mesh.uniform(1, 8))
        ops = assemble_constant(space)
        bt = assemble_time_dependent(space, b, params, 0.5)
        for M in (bt.B2, bt.B3, bt.B4):
            assert np.max(np.abs(M.toarray())) == 0.0
        expected = (params.zeta0 / 64.0**2) * ops.K1.toarray()
        np.testing.assert_allclose(bt.B1.toarray(), expected, rtol=1e-13)

    def test_b2_symmetric(self, params):
        b = MovingBoundary.b2(2)
        space = HermiteSpace(Mesh.uniform(2, 3))
        bt = assemble_time_dependent(space, b, params, 0.3)
        d = (bt.B2 - bt.B2.T).toarray()
        assert np.max(np.abs(d)) < 1e-14 * max(1.0, np.max(np.abs(bt.B2.toarray())))

    def test_singular_mapping_propagates(self, params):
        from movingbeam import BoundaryKind, SingularMappingError

        b = MovingBoundary(
            BoundaryKind.CUSTOM,
            custom=(lambda t: 0.0, lambda t: 0.0, lambda t: 0.0),
        )
        space = HermiteSpace(Mesh.uniform(1, 4))
        with pytest.raises(SingularMappingError):
            assemble_time_dependent(space, b, params, 1.0)

    def test_b1_entry_against_dense_quadrature_oracle(self, b1_1d, params):
        space = HermiteSpace(Mesh.uniform(1, 4))
        bt = assemble_time_dependent(space, b1_1d, params, 0.0)
        # oracle: 32-point Gauss per cell of a1(y, 0) phi_k' phi_l'
        tab = space.basis_tables(32)
        pts = tab["points"].reshape(-1, 1)
        a1 = np.array([
            eval_coefficients(b1_1d, params, [y], 0.0).a1[0] for y in pts[:, 0]
        ])
        shape = tab["points"].shape[:2]
        g = tab["grad"][:, :, 0]
        elem = np.einsum(
            "cq,qa,qb->cab", a1.reshape(shape) * tab["w"][None, :], g, g
        )
        oracle = space.scatter(elem).toarray()
        np.testing.assert_allclose(bt.B1.toarray(), oracle, rtol=1e-12, atol=1e-15)

    def test_quadratic_form_positivity(self, params, rng):
        # discrete coercivity surrogate: w^T (B1 + G K1 + b2 K2) w > 0 for
        # admissible boundaries, sampled times and random states
        from movingbeam import kirchhoff_scalar

        for b in (MovingBoundary.b1(1), MovingBoundary.b2(1)):
            space = HermiteSpace(Mesh.uniform(1, 8))
            ops = assemble_constant(space)
            for t in np.linspace(0.0, 1.0, 4):
                bt = assemble_time_dependent(space, b, params, float(t))
                cs = eval_coefficients(b, params, [0.0], float(t))
                state = 0.1 * rng.standard_normal(space.ndof)
                g = kirchhoff_scalar(cs.b1, state, ops.K1)
                Q = (bt.B1 + g * ops.K1 + cs.b2 * ops.K2).toarray()
                for _ in range(100):
                    w = rng.standard_normal(space.ndof)
                    assert w @ (Q @ w) > 0.0


class TestLoad:
    def test_zero_source(self, space_1d_coarse):
        F = assemble_load(space_1d_coarse, lambda pts, t: np.zeros(len(pts)), 0.0)
        assert np.all(F == 0.0)

    def test_constant_source_partition(self):
        # sum over free value DOFs of (1, phi_l) is |box| minus the two
        # boundary value-shape integrals (h/2 each)
        space = HermiteSpace(Mesh.uniform(1, 8))
        h = space.mesh.h[0]
        F = assemble_load(space, lambda pts, t: np.ones(len(pts)), 0.0)
        full = np.zeros(space.ndof_full)
        full[space.free_dofs] = F
        total = full[0::2].sum()
        assert total == pytest.approx(2.0 - h, rel=1e-13)

    def test_basis_function_source_gives_mass_column(self, space_1d_coarse, rng):
        ops = assemble_constant(space_1d_coarse)
        m = 3
        em = np.zeros(space_1d_coarse.ndof)
        em[m] = 1.0
        f = lambda pts, t: space_1d_coarse.eval_points(em, pts)
        F = assemble_load(space_1d_coarse, f, 0.0, nq=8)
        np.testing.assert_allclose(F, ops.A.toarray()[:, m], rtol=1e-12, atol=1e-16)

    def test_non_finite_source_rejected(self, space_1d_coarse):
        def bad(pts, t):
            v = np.ones(len(pts))
            v[0] = np.inf
            return v

        with pytest.raises(ValueError, match="non-finite"):
            assemble_load(space_1d_coarse, bad, 0.0)


class TestInterpolation:
    def test_space_member_reproduced(self, space_1d_coarse, rng):
        d_ref = rng.standard_normal(space_1d_coarse.ndof)
        full = space_1d_coarse.expand(d_ref)

        def derivs(pts, mi):
            d = {(0,): 0, (1,): 1}[tuple(mi)]
            nodes = space_1d_coarse.mesh.node_coords()[:, 0]
            idx = np.searchsorted(nodes, np.atleast_2d(pts)[:, 0])
            return full[2 * idx + d]

        d_new = interpolate_initial(space_1d_coarse, derivs)
        np.testing.assert_array_equal(d_new, d_ref)

    def test_s1_nodal_values(self, s1_1d):
        space = HermiteSpace(Mesh.uniform(1, 4))
        d0 = interpolate_initial(space, s1_1d.initial_displacement())
        full = space.expand(d0)
        # node y=0 is the middle node: value 0.1, derivative 0
        mid = space.mesh.nodes_per_axis[0] // 2
        assert full[2 * mid] == pytest.approx(0.1)
        assert full[2 * mid + 1] == 0.0

    def test_zero_velocity_datum(self, s1_1d, space_1d_coarse):
        d1 = interpolate_initial(space_1d_coarse, s1_1d.initial_velocity())
        assert np.all(d1 == 0.0)  # cos factor: v_t(., 0) = 0

    def test_l2_projection_mode(self, s1_1d):
        # projection solves A d = (v, phi); for the quartic datum it agrees
        # with nodal interpolation to interpolation-error accuracy and its
        # own L2 error is no larger
        from movingbeam import project_initial

        space = HermiteSpace(Mesh.uniform(1, 16))
        ops = assemble_constant(space)
        d_i = interpolate_initial(space, s1_1d.initial_displacement())
        d_p = project_initial(
            space, ops, lambda pts, t: s1_1d.eval(pts, 0.0), nq=8
        )
        tab = space.basis_tables(8)
        ve = s1_1d.eval(tab["points"].reshape(-1, 1), 0.0)

        def l2err(d):
            vh = space.eval_at_quad(d, 8, "N").ravel()
            return np.sqrt(np.sum((vh - ve) ** 2 * np.tile(tab["w"], space.mesh.ncells)))

        assert l2err(d_p) <= l2err(d_i) * 1.0001
        assert np.max(np.abs(d_p - d_i)) < 1e-4

    def test_quartic_interpolation_error_order(self, s1_1d):
        # L2 interpolation error of the quartic datum decays like h^4
        errs = []
        for cells in (8, 16):
            space = HermiteSpace(Mesh.uniform(1, cells))
            d = interpolate_initial(space, s1_1d.initial_displacement())
            tab = space.basis_tables(8)
            vh = space.eval_at_quad(d, 8, "N")
            ve = s1_1d.eval(tab["points"].reshape(-1, 1), 0.0).reshape(vh.shape)
            errs.append(np.sqrt(np.sum((vh - ve) ** 2 * tab["w"][None, :])))
        assert errs[0] / errs[1] > 12.0


class TestConformity:
    def test_c1_across_interfaces_1d(self, space_1d_coarse, rng):
        d = rng.standard_normal(space_1d_coarse.ndof)
        nodes = space_1d_coarse.mesh.node_coords()[1:-1, 0]
        eps = 1e-9
        for y in nodes:
            for deriv in ("N", "grad0"):
                left = space_1d_coarse.eval_points(d, [[y - eps]], deriv)[0]
                right = space_1d_coarse.eval_points(d, [[y + eps]], deriv)[0]
                assert abs(left - right) < 1e-6  # continuity up to eps*|v''|

    def test_c1_across_interfaces_2d_exact(self, space_2d_coarse, rng):
        # evaluate on the shared facet from both neighbour cells at quad points
        d = rng.standard_normal(space_2d_coarse.ndof)
        full = space_2d_coarse.expand(d)
        mesh = space_2d_coarse.mesh
        hx, hy = mesh.h
        from movingbeam.hermite import shape_eval_2d

        sq = np.linspace(0.05, 0.95, 7)
        for ex in (0, 1):  # facet between cell (ex, ey) and (ex+1, ey)
            ey = 1
            cl = ey * mesh.cells_per_axis[0] + ex
            cr = ey * mesh.cells_per_axis[0] + ex + 1
            dl = full[space_2d_coarse.element_dofs[cl]]
            dr = full[space_2d_coarse.element_dofs[cr]]
            tl = shape_eval_2d(np.ones_like(sq), sq, hx, hy)
            tr = shape_eval_2d(np.zeros_like(sq), sq, hx, hy)
            for key in ("N", "dx", "dy"):
                jump = np.max(np.abs(tl[key] @ dl - tr[key] @ dr))
                assert jump < 1e-12 * max(1.0, np.max(np.abs(tl[key] @ dl)))


class TestMeshValidation:
    def test_bad_dim(self):
        with pytest.raises(ValueError):
            Mesh(3, ((0, 1),) * 3, (2,) * 3)

    def test_degenerate_box(self):
        with pytest.raises(ValueError):
            Mesh(1, ((1.0, 1.0),), (4,))

    def test_h_property(self):
        m = Mesh.uniform(2, 8)
        assert m.h == (0.25, 0.25)
        assert m.nnodes == 81
