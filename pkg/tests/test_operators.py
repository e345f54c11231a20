import numpy as np
import pytest

from lightcone.operators import (Field, H2kField, ProblemParams,
                                 ResolventResidualError, apply_D2k, apply_L,
                                 apply_L0, apply_Lprime, energy_form,
                                 export_matrix_csv, generator_matrix, h_inner,
                                 h_norm, resolvent_at_one)
from lightcone.spectral import GridFn, make_basis


def field(basis, f1, f2):
    rho = basis.nodes
    return Field(GridFn(f1(rho) + 0 * rho, basis), GridFn(f2(rho) + 0 * rho, basis))


def random_parity(basis, rng, degree=12):
    rho = basis.nodes
    u1 = sum(rng.standard_normal() / (1 + m) * rho ** m for m in range(1, degree + 1, 2))
    u2 = sum(rng.standard_normal() / (1 + m) * rho ** m for m in range(0, degree + 1, 2))
    return Field(GridFn(u1 + 0 * rho, basis), GridFn(u2 + 0 * rho, basis))


class TestProblemParams:
    def test_potential_strength(self):
        assert ProblemParams(3).pc0 == 6.0
        assert ProblemParams(5).pc0 == 3.75
        assert abs(ProblemParams(7).pc0 - 28.0 / 9.0) < 1e-16

    def test_rejects_even_p(self):
        with pytest.raises(ValueError):
            ProblemParams(4)
        with pytest.raises(ValueError):
            ProblemParams(2.5)

    def test_real_p_escape_hatch_warns(self):
        with pytest.warns(UserWarning):
            params = ProblemParams(2.5, allow_real_p=True)
        assert abs(params.pc0 - 2 * 2.5 * 3.5 / 1.5 ** 2) < 1e-15

    def test_exact_potential(self):
        from fractions import Fraction
        assert ProblemParams(3).pc0_exact == Fraction(6)
        assert ProblemParams(5).pc0_exact == Fraction(15, 4)


class TestApplyL0:
    def test_stationary_mode(self):
        basis = make_basis(16)
        u = field(basis, lambda r: 0 * r, lambda r: -2 + 0 * r)
        out = apply_L0(u)
        assert h_norm(out) < 1e-12

    def test_decaying_mode(self):
        basis = make_basis(16)
        u = field(basis, lambda r: 4 * r, lambda r: -4 + 0 * r)
        out = apply_L0(u)
        assert h_norm(out + u) < 1e-12

    def test_direct_substitution(self):
        basis = make_basis(16)
        u = field(basis, lambda r: r, lambda r: 0 * r)
        out = apply_L0(u)
        assert np.max(np.abs(out.u1.values + basis.nodes)) < 1e-12
        assert np.max(np.abs(out.u2.values - 1)) < 1e-12


class TestApplyLprime:
    def test_constant_u2(self):
        basis = make_basis(16)
        u = field(basis, lambda r: 0 * r, lambda r: np.ones_like(r))
        out = apply_Lprime(u, ProblemParams(3))
        assert np.max(np.abs(out.u1.values - 6 * basis.nodes)) < 1e-14
        assert np.max(np.abs(out.u2.values)) == 0.0

    def test_zero_u2(self):
        basis = make_basis(16)
        u = field(basis, lambda r: r, lambda r: 0 * r)
        assert h_norm(apply_Lprime(u, ProblemParams(3))) == 0.0

    def test_p5(self):
        basis = make_basis(16)
        u = field(basis, lambda r: 0 * r, lambda r: 2 * r)
        out = apply_Lprime(u, ProblemParams(5))
        assert np.max(np.abs(out.u1.values - 3.75 * basis.nodes ** 2)) < 1e-14


class TestApplyL:
    def test_reduces_to_free(self):
        basis = make_basis(16)
        rng = np.random.default_rng(1)
        u = random_parity(basis, rng)
        assert h_norm(apply_L(u, None) - apply_L0(u)) == 0.0

    def test_p3_rho(self):
        basis = make_basis(16)
        u = field(basis, lambda r: r, lambda r: 0 * r)
        out = apply_L(u, ProblemParams(3))
        assert np.max(np.abs(out.u1.values + basis.nodes)) < 1e-12
        assert np.max(np.abs(out.u2.values - 1)) < 1e-12

    def test_p3_componentwise(self):
        # free part of (0, 1) vanishes (both components are derivatives of
        # constants), leaving only the potential term (6 rho, 0)
        basis = make_basis(16)
        u = field(basis, lambda r: 0 * r, lambda r: np.ones_like(r))
        out = apply_L(u, ProblemParams(3))
        free_part = apply_L0(u)
        assert h_norm(free_part) < 1e-12
        assert np.max(np.abs(out.u1.values - 6 * basis.nodes)) < 1e-12
        assert np.max(np.abs(out.u2.values)) < 1e-13


class TestApplyD2k:
    def test_second_derivative(self):
        basis = make_basis(16)
        u = field(basis, lambda r: r ** 3, lambda r: r ** 2)
        out = apply_D2k(u, 1)
        assert np.max(np.abs(out.u1.values - 6 * basis.nodes)) < 1e-12
        assert np.max(np.abs(out.u2.values - 2)) < 1e-12

    def test_kernel(self):
        basis = make_basis(16)
        u = field(basis, lambda r: 4 * r, lambda r: -4 + 0 * r)
        assert h_norm(apply_D2k(u, 1)) < 1e-13
        u = field(basis, lambda r: r ** 3 - r, lambda r: r ** 2 + 1)
        assert h_norm(apply_D2k(u, 2)) < 1e-11

    def test_rejects_large_order(self):
        basis = make_basis(8)
        u = field(basis, lambda r: r, lambda r: 0 * r)
        with pytest.raises(ValueError):
            apply_D2k(u, 4)

    def test_identity_for_k0(self):
        basis = make_basis(8)
        u = field(basis, lambda r: r, lambda r: r ** 2)
        out = apply_D2k(u, 0)
        assert h_norm(out - u) == 0.0


class TestResolvent:
    def test_linear_example(self):
        basis = make_basis(32)
        f = field(basis, lambda r: 2 * r, lambda r: -np.ones_like(r))
        u = resolvent_at_one(f)
        assert np.max(np.abs(u.u1.values - basis.nodes)) < 1e-13
        assert np.max(np.abs(u.u2.values)) < 1e-13

    def test_zero(self):
        basis = make_basis(32)
        f = field(basis, lambda r: 0 * r, lambda r: 0 * r)
        assert h_norm(resolvent_at_one(f)) == 0.0

    def test_eigenmode_shift(self):
        basis = make_basis(32)
        f = field(basis, lambda r: 8 * r, lambda r: -8 + 0 * r)
        u = resolvent_at_one(f)
        assert np.max(np.abs(u.u1.values - 4 * basis.nodes)) < 1e-12
        assert np.max(np.abs(u.u2.values + 4)) < 1e-12

    def test_residual_invariant_random_polynomials(self):
        basis = make_basis(64)
        rng = np.random.default_rng(7)
        rho = basis.nodes
        for _ in range(20):
            c1 = rng.standard_normal(working := basis.n // 2)
            c2 = rng.standard_normal(working)
            f = Field(GridFn(np.polynomial.polynomial.polyval(rho, c1), basis),
                      GridFn(np.polynomial.polynomial.polyval(rho, c2), basis))
            u = resolvent_at_one(f)
            residual = h_norm((u - apply_L0(u)) - f)
            assert residual < 1e-10 * max(1.0, h_norm(f))

    def test_raises_when_under_resolved(self):
        basis = make_basis(4)
        rho = basis.nodes
        f = Field(GridFn(rho ** 3 - rho, basis), GridFn(rho ** 2 - 3 * rho, basis))
        with pytest.raises(ResolventResidualError):
            resolvent_at_one(f, tol=1e-12)


class TestEnergyForm:
    def test_stationary_mode_zero(self):
        basis = make_basis(32)
        u = field(basis, lambda r: 0 * r, lambda r: -2 + 0 * r)
        val = energy_form(u, op="L0", inner="H")
        assert abs(val) < 1e-13
        assert val <= 0.5 * h_norm(u) ** 2 + 1e-13

    def test_decaying_mode(self):
        basis = make_basis(32)
        u = field(basis, lambda r: 4 * r, lambda r: -4 + 0 * r)
        val = energy_form(u, op="L0", inner="H")
        assert abs(val + h_norm(u) ** 2) < 1e-12

    def test_dissipativity_sampled(self):
        basis = make_basis(64)
        rng = np.random.default_rng(11)
        params = ProblemParams(3)
        for _ in range(100):
            rho = basis.nodes
            c1 = rng.standard_normal(10)
            c2 = rng.standard_normal(10)
            u1 = rho * np.polynomial.polynomial.polyval(rho, c1)  # u1(0) = 0
            u2 = np.polynomial.polynomial.polyval(rho, c2)
            u = Field(GridFn(u1, basis), GridFn(u2, basis))
            nsq = h_norm(u) ** 2
            assert energy_form(u, op="L0", inner="H") <= 0.5 * nsq + 1e-8 * nsq
            assert energy_form(u, op="L", params=params, inner="H") \
                <= (0.5 + params.pc0) * nsq + 1e-8 * nsq

    def test_h2k_form_bound(self):
        basis = make_basis(64)
        rng = np.random.default_rng(3)
        u = random_parity(basis, rng)
        for k in (1, 2):
            nsq = h_norm(u) ** 2 + h_norm(apply_D2k(u, k, chop=True)) ** 2
            assert energy_form(u, op="L0", inner="H2k", k=k) <= 0.5 * nsq + 1e-8 * nsq

    def test_nperp_form_bound(self):
        # seminorm estimate: Re (L0 u | u)_Nperp <= (1/2 - 2k) |u|_Nperp^2
        basis = make_basis(64)
        rng = np.random.default_rng(5)
        for k in (1, 2):
            for _ in range(20):
                u = random_parity(basis, rng)
                seminorm_sq = h_norm(apply_D2k(u, k, chop=True)) ** 2
                val = energy_form(u, op="L0", inner="Nperp", k=k)
                assert val <= (0.5 - 2 * k) * seminorm_sq + 1e-8 * max(1.0, seminorm_sq)


class TestCommutators:
    # composed spectral operators at large n amplify transform noise, so
    # the machine-precision identity checks run on a grid that still
    # resolves the degree-12 data with room to spare
    def test_order_two_commutator(self):
        basis = make_basis(32)
        rng = np.random.default_rng(17)
        worst = 0.0
        for _ in range(100):
            u = random_parity(basis, rng)
            lhs = apply_D2k(apply_L0(u), 1)
            rhs = apply_D2k(u, 1)
            rhs = apply_L0(rhs) - 2.0 * rhs
            scale = max(h_norm(lhs), h_norm(rhs), 1.0)
            worst = max(worst, h_norm(lhs - rhs) / scale)
        assert worst < 1e-12

    def test_iterated_commutator(self):
        basis = make_basis(32)
        rng = np.random.default_rng(19)
        for k in (1, 2):
            for _ in range(20):
                u = random_parity(basis, rng)
                lhs = apply_D2k(apply_L0(u), k)
                d = apply_D2k(u, k)
                rhs = apply_L0(d) - (2.0 * k) * d
                scale = max(h_norm(lhs), h_norm(rhs), 1.0)
                # order-4 differentiation amplifies roundoff harder
                assert h_norm(lhs - rhs) / scale < 1e-10

    def test_lprime_commutes(self):
        basis = make_basis(32)
        rng = np.random.default_rng(23)
        params = ProblemParams(5)
        for k in (1, 2):
            # the antiderivative feeding the k=2 side pushes top-degree
            # coefficients near machine level before the 4th derivative
            tol = 1e-10 if k == 1 else 1e-8
            for _ in range(20):
                u = random_parity(basis, rng)
                lhs = apply_D2k(apply_Lprime(u, params), k)
                rhs = apply_Lprime(apply_D2k(u, k), params)
                scale = max(h_norm(lhs), h_norm(rhs), 1.0)
                assert h_norm(lhs - rhs) / scale < tol


class TestGeneratorMatrix:
    def test_matches_operator_application(self):
        basis = make_basis(24)
        rng = np.random.default_rng(2)
        u = random_parity(basis, rng)
        A = generator_matrix(basis, None, constrained=False)
        direct = apply_L0(u).stacked()
        assert np.max(np.abs(A @ u.stacked() - direct)) < 1e-10

    def test_constraint_row(self):
        basis = make_basis(24)
        A = generator_matrix(basis, ProblemParams(3), constrained=True)
        assert np.all(A[0, :] == 0.0)

    def test_semilinear_block(self):
        basis = make_basis(24)
        rng = np.random.default_rng(4)
        u = random_parity(basis, rng)
        params = ProblemParams(3)
        A = generator_matrix(basis, params, constrained=False)
        direct = apply_L(u, params).stacked()
        assert np.max(np.abs(A @ u.stacked() - direct)) < 1e-10

    def test_export_csv(self, tmp_path):
        basis = make_basis(4)
        A = generator_matrix(basis)
        path = tmp_path / "gen.csv"
        export_matrix_csv(A, path)
        rows = path.read_text().strip().splitlines()
        assert len(rows) == 8
        parsed = np.array([[float(v) for v in row.split(",")] for row in rows])
        assert np.array_equal(parsed, A)


class TestH2kField:
    def test_accepts_conforming(self):
        basis = make_basis(32)
        rho = basis.nodes
        u = Field(GridFn(rho, basis), GridFn(np.ones(basis.n), basis))
        H2kField(u, 1)

    def test_rejects_violating(self):
        basis = make_basis(32)
        u = Field(GridFn(np.ones(basis.n), basis), GridFn(np.zeros(basis.n), basis))
        with pytest.raises(ValueError):
            H2kField(u, 1)


def test_h_inner_linearity():
    basis = make_basis(16)
    rng = np.random.default_rng(6)
    a = random_parity(basis, rng)
    b = random_parity(basis, rng)
    lhs = h_inner(a + b, a)
    rhs = h_inner(a, a) + h_inner(b, a)
    assert abs(lhs - rhs) < 1e-12
