import json

import numpy as np
import pytest

from lightcone.spectral import (GridFn, antiderivative, barycentric_eval,
                                differentiate, l2_inner, make_basis)


def test_make_basis_rejects_small():
    for bad in (0, 1, -3):
        with pytest.raises(ValueError):
            make_basis(bad)


def test_nodes_endpoints_and_midpoint_exact():
    assert list(make_basis(2).nodes) == [0.0, 1.0]
    assert list(make_basis(3).nodes) == [0.0, 0.5, 1.0]
    for n in (2, 17, 64, 129):
        nodes = make_basis(n).nodes
        assert nodes[0] == 0.0
        assert nodes[-1] == 1.0
        assert np.all(np.diff(nodes) > 0)


def test_quadrature_degree_exactness():
    basis = make_basis(5)
    assert abs(basis.quad_weights @ basis.nodes ** 4 - 0.2) < 1e-14
    # exact for every monomial of degree <= n-1
    for n in (2, 3, 8, 33, 64):
        basis = make_basis(n)
        for d in range(n):
            got = basis.quad_weights @ basis.nodes ** d
            assert abs(got - 1.0 / (d + 1)) < 1e-13 * (d + 1)


def test_quadrature_weights_nonnegative():
    for n in (2, 3, 16, 64, 256):
        assert np.all(make_basis(n).quad_weights >= 0.0)


def test_transform_round_trip():
    for n in (8, 64, 256):
        basis = make_basis(n)
        rng = np.random.default_rng(n)
        f = np.exp(basis.nodes) * np.sin(3 * basis.nodes) + rng.standard_normal()
        back = basis.to_values(basis.to_coeffs(f))
        assert np.max(np.abs(back - f)) < 1e-12 * np.max(np.abs(f))


def test_differentiate_examples():
    basis = make_basis(9)
    rho = basis.nodes
    sq = GridFn(rho ** 2, basis)
    assert np.max(np.abs(differentiate(sq).values - 2 * rho)) < 1e-13
    const = GridFn(np.full(basis.n, 4.2), basis)
    assert np.max(np.abs(differentiate(const).values)) < 1e-12
    # (1-rho)^3 - (1+rho)^3 = -6 rho - 2 rho^3  ->  -6 - 6 rho^2
    cubic = GridFn((1 - rho) ** 3 - (1 + rho) ** 3, basis)
    assert np.max(np.abs(differentiate(cubic).values - (-6 - 6 * rho ** 2))) < 1e-12


def test_antiderivative_examples():
    basis = make_basis(9)
    rho = basis.nodes
    one = GridFn(np.ones(basis.n), basis)
    assert np.max(np.abs(antiderivative(one).values - rho)) < 1e-14
    lin = GridFn(2 * rho, basis)
    assert np.max(np.abs(antiderivative(lin).values - rho ** 2)) < 1e-14
    f = GridFn(-6 - 6 * rho ** 2, basis)
    assert np.max(np.abs(antiderivative(f).values - (-6 * rho - 2 * rho ** 3))) < 1e-13


def test_derivative_of_antiderivative_is_identity():
    basis = make_basis(16)
    rng = np.random.default_rng(0)
    coeffs = rng.standard_normal(basis.n - 1)  # degree <= n-2
    vals = np.polynomial.polynomial.polyval(basis.nodes, coeffs)
    f = GridFn(vals, basis)
    round_trip = differentiate(antiderivative(f))
    assert np.max(np.abs(round_trip.values - vals)) < 1e-11 * max(1, np.max(np.abs(vals)))


def test_l2_inner_examples():
    basis = make_basis(8)
    rho = basis.nodes
    one = GridFn(np.ones(8), basis)
    lin = GridFn(rho, basis)
    sq = GridFn(rho ** 2, basis)
    assert abs(l2_inner(one, one) - 1.0) < 1e-15
    assert abs(l2_inner(lin, lin) - 1 / 3) < 1e-15
    assert abs(l2_inner(lin, sq) - 1 / 4) < 1e-15


def test_l2_inner_conjugates_second_argument():
    basis = make_basis(8)
    f = GridFn((1 + 2j) * np.ones(8), basis)
    g = GridFn((3 - 1j) * np.ones(8), basis)
    assert abs(l2_inner(f, g) - (1 + 2j) * (3 + 1j)) < 1e-14


def test_barycentric_eval_polynomial_exact():
    basis = make_basis(12)
    rho = basis.nodes
    f = GridFn(rho ** 5 - 2 * rho + 1, basis)
    xi = np.linspace(0, 1, 37)
    expected = xi ** 5 - 2 * xi + 1
    assert np.max(np.abs(barycentric_eval(f, xi) - expected)) < 1e-13
    # exact node hits take the stored sample
    assert np.max(np.abs(barycentric_eval(f, rho) - f.values)) == 0.0


def test_gridfn_serialization(tmp_path):
    basis = make_basis(4)
    f = GridFn(basis.nodes ** 2, basis)
    csv_path = tmp_path / "f.csv"
    f.to_csv(csv_path)
    lines = csv_path.read_text().strip().splitlines()
    assert lines[0] == "rho,value"
    assert len(lines) == 5
    first = lines[1].split(",")
    assert float(first[0]) == 0.0
    obj = f.to_json(tmp_path / "f.json")
    loaded = json.loads((tmp_path / "f.json").read_text())
    assert loaded == obj
    assert loaded["rho"][0] == 0.0 and loaded["rho"][-1] == 1.0


def test_shape_mismatch_rejected():
    basis = make_basis(4)
    with pytest.raises(ValueError):
        GridFn(np.zeros(5), basis)
