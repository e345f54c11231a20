import json

import numpy as np
import pytest

from lightcone.decompose import (GramConditionError, analytic_basis,
                                 check_membership, h2k_inner, h2k_norm,
                                 kernel_dimension_check, modal_expansion,
                                 nperp_norm, project)
from lightcone.operators import Field, ProblemParams, h_inner, h_norm
from lightcone.spectral import GridFn, make_basis


def field(basis, f1, f2):
    rho = basis.nodes
    return Field(GridFn(f1(rho) + 0 * rho, basis), GridFn(f2(rho) + 0 * rho, basis))


def random_parity(basis, rng, degree=12):
    rho = basis.nodes
    u1 = sum(rng.standard_normal() / (1 + m) * rho ** m for m in range(1, degree + 1, 2))
    u2 = sum(rng.standard_normal() / (1 + m) * rho ** m for m in range(0, degree + 1, 2))
    return Field(GridFn(u1 + 0 * rho, basis), GridFn(u2 + 0 * rho, basis))


class TestH2kInner:
    def test_k0_is_base_product(self):
        basis = make_basis(32)
        rng = np.random.default_rng(0)
        u = random_parity(basis, rng)
        v = random_parity(basis, rng)
        assert h2k_inner(u, v, 0) == h_inner(u, v)

    def test_hand_quadrature(self):
        basis = make_basis(32)
        u = field(basis, lambda r: r ** 3, lambda r: 0 * r)
        got = h2k_inner(u, u, 1)
        assert abs(got - (1.0 / 7.0 + 12.0)) < 1e-12

    def test_kernel_element_reduces_to_l2(self):
        basis = make_basis(32)
        rng = np.random.default_rng(1)
        u = field(basis, lambda r: 4 * r, lambda r: -4 + 0 * r)  # in ker D^2
        v = random_parity(basis, rng)
        assert abs(h2k_inner(u, v, 1) - h_inner(u, v)) < 1e-12


class TestAnalyticBasis:
    def test_free_k1_span(self):
        basis = make_basis(32)
        modes = analytic_basis(None, 1, basis)
        assert [m.label for m in modes] == ["free(1)", "free(2)"]
        # spans {(0,-2), (4 rho, -4)}: first mode proportional to (0, 1)
        m1, m2 = modes
        assert np.max(np.abs(m1.field.u1.values)) < 1e-13
        assert np.std(m1.field.u2.values) < 1e-13
        ratio = m2.field.u1.values[1:] / basis.nodes[1:]
        assert np.std(ratio) < 1e-12

    def test_semilinear_p3(self):
        basis = make_basis(32)
        modes = analytic_basis(ProblemParams(3), 1, basis)
        assert [complex(m.lam).real for m in modes] == [2.0, -3.0]
        modes = analytic_basis(ProblemParams(3), 2, basis)
        assert [complex(m.lam).real for m in modes] == [2.0, -3.0, 0.0, -5.0]
        # level-1 profile is rho - rho^3 up to scale
        lam0 = modes[2]
        coeffs = lam0.profile.coeffs
        assert abs(coeffs[3] / coeffs[1] + 1.0) < 1e-14

    def test_normalization_convention(self):
        basis = make_basis(64)
        for params in (None, ProblemParams(3), ProblemParams(5)):
            for k in (1, 2):
                for mp in analytic_basis(params, k, basis):
                    assert abs(h2k_norm(mp.field, k) - 1.0) < 1e-10
                    du = np.polynomial.polynomial.polyder(mp.profile.coeffs)
                    lead = du[np.nonzero(np.round(du, 14))[0][-1]]
                    assert lead * mp.normalization > 0 or mp.normalization > 0

    def test_u2_leading_coefficient_positive(self):
        basis = make_basis(64)
        for params in (None, ProblemParams(3)):
            for mp in analytic_basis(params, 2, basis):
                u2c = mp.field.u2.coeffs()
                nz = np.nonzero(np.abs(u2c) > 1e-10 * np.max(np.abs(u2c)))[0]
                # evaluate the grid u2 leading monomial coefficient instead:
                du = np.polynomial.polynomial.polyder(mp.profile.coeffs) * mp.normalization
                lead = du[np.nonzero(np.round(du, 14))[0][-1]]
                assert lead > 0

    def test_annihilated_by_d2k(self):
        basis = make_basis(64)
        for params in (None, ProblemParams(5)):
            for k in (1, 2):
                for mp in analytic_basis(params, k, basis):
                    assert nperp_norm(mp.field, k) < 1e-12


class TestProject:
    def test_basis_element(self):
        basis = make_basis(64)
        modes = analytic_basis(None, 2, basis)
        dec = project(modes[1].field, 2, None)
        expected = np.zeros(4)
        expected[1] = 1.0
        assert np.max(np.abs(dec.coeffs - expected)) < 1e-11
        assert h_norm(dec.remainder) < 1e-11

    def test_linearity(self):
        basis = make_basis(64)
        modes = analytic_basis(None, 2, basis)
        u = 3.0 * modes[0].field - 2.0 * modes[2].field
        dec = project(u, 2, None)
        assert np.max(np.abs(dec.coeffs - [3.0, 0.0, -2.0, 0.0])) < 1e-11
        assert h_norm(dec.remainder) < 1e-11

    def test_bump_remainder_orthogonal(self):
        basis = make_basis(64)
        k = 1
        modes = analytic_basis(None, k, basis)
        rho = basis.nodes
        bump = Field(GridFn(rho ** (2 * k + 1), basis),
                     GridFn(rho ** (2 * k + 2), basis))
        u = modes[0].field + bump
        dec = project(u, k, None)
        assert h2k_norm(dec.remainder, k) > 1e-3
        assert np.max(dec.orthogonality_residuals()) < 1e-9

    def test_projection_idempotent(self):
        basis = make_basis(64)
        rng = np.random.default_rng(3)
        u = random_parity(basis, rng)
        for k in (1, 2):
            dec = project(u, k, None)
            mode_part = dec.reconstruct() - dec.remainder
            again = project(mode_part, k, None)
            assert np.max(np.abs(again.coeffs - dec.coeffs)) < 1e-10
            assert h_norm(again.remainder) < 1e-10

    def test_reconstruction(self):
        basis = make_basis(64)
        rng = np.random.default_rng(4)
        for params in (None, ProblemParams(3)):
            u = random_parity(basis, rng)
            for k in (1, 2):
                dec = project(u, k, params)
                assert dec.reconstruction_error(u) < 1e-10
                assert np.max(dec.orthogonality_residuals()) < 1e-9

    def test_gram_condition_recorded(self):
        basis = make_basis(64)
        rng = np.random.default_rng(5)
        dec = project(random_parity(basis, rng), 2, None)
        assert 1.0 <= dec.gram_condition_number < 1e6

    def test_degenerate_basis_rejected(self):
        basis = make_basis(64)
        modes = analytic_basis(None, 1, basis)
        degenerate = [modes[0], modes[0].scaled(1.0 + 1e-15)]
        rng = np.random.default_rng(6)
        with pytest.raises(GramConditionError):
            project(random_parity(basis, rng), 1, None, modes=degenerate)


class TestKernelDimension:
    def test_dim_and_escape(self):
        basis = make_basis(64)
        for params in (None, ProblemParams(3)):
            for k in (1, 2):
                rep = kernel_dimension_check(params, k, basis)
                assert rep["dim"] == 2 * k
                assert rep["gram_determinant"] != 0.0
                assert np.isfinite(rep["gram_condition_number"])
                assert max(rep["kernel_seminorms"]) < 1e-12
                assert rep["next_mode_seminorm"] > 1e-2


class TestNormEquivalence:
    def test_seminorm_bounds_on_remainders(self):
        basis = make_basis(64)
        rng = np.random.default_rng(7)
        for k in (1, 2):
            ratios = []
            for _ in range(20):
                u = random_parity(basis, rng)
                g = project(u, k, None).remainder
                full = h2k_norm(g, k)
                semi = nperp_norm(g, k)
                assert semi <= full * (1.0 + 1e-10)
                ratios.append(semi / full)
            assert min(ratios) > 0.0


class TestMembership:
    def test_pass(self):
        basis = make_basis(32)
        u = field(basis, lambda r: r, lambda r: np.ones_like(r))
        assert check_membership(u, 1).passed

    def test_fail_u1(self):
        basis = make_basis(32)
        u = field(basis, lambda r: np.ones_like(r), lambda r: 0 * r)
        rep = check_membership(u, 1)
        assert not rep.passed
        assert not rep.conditions[0]["pass"]

    def test_fail_u2(self):
        basis = make_basis(32)
        u = field(basis, lambda r: r, lambda r: r)
        rep = check_membership(u, 1)
        assert not rep.passed
        assert rep.conditions[0]["pass"]
        assert not rep.conditions[1]["pass"]


class TestModalExpansion:
    def test_recovers_known_coefficients(self):
        basis = make_basis(64)
        for params in (None, ProblemParams(5)):
            from lightcone.modes import mode_catalogue
            levels = 6 if params else 9
            modes = mode_catalogue(params, basis, levels)
            modes = [m.scaled(1.0 / h_norm(m.field)) for m in modes]
            rng = np.random.default_rng(11)
            truth = rng.standard_normal(len(modes))
            u = None
            for c, m in zip(truth, modes):
                term = c * m.field
                u = term if u is None else u + term
            got, _ = modal_expansion(u, params, modes=modes)
            assert np.max(np.abs(got - truth)) < 1e-8

    def test_rejects_off_span_content(self):
        from lightcone.decompose import ModalExpansionError
        basis = make_basis(64)
        rho = basis.nodes
        u = Field(GridFn(np.sin(3 * rho), basis), GridFn(np.cos(rho), basis))
        with pytest.raises(ModalExpansionError):
            modal_expansion(u, None, levels=4)


def test_decomposition_serialization(tmp_path):
    basis = make_basis(64)
    rng = np.random.default_rng(9)
    u = random_parity(basis, rng)
    dec = project(u, 1, ProblemParams(3))
    dec.remainder.to_csv(tmp_path / "remainder.csv")
    obj = dec.to_json(tmp_path / "dec.json", remainder_csv_path="remainder.csv")
    loaded = json.loads((tmp_path / "dec.json").read_text())
    assert loaded == json.loads(json.dumps(obj))
    assert loaded["k"] == 1
    assert loaded["problem"] == "semilinear(p=3)"
    assert len(loaded["coeffs"]) == 2
    assert (tmp_path / "remainder.csv").read_text().startswith("rho,u1,u2")
