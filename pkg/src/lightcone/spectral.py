"""Chebyshev collocation machinery on the unit interval.

Nodes are Gauss-Lobatto points mapped to [0, 1] and stored in ascending
order, so nodes[0] == 0 and nodes[-1] == 1 exactly. All calculus is done
in Chebyshev coefficient space (values <-> coefficients via the DCT-I
matrices); quadrature weights are Clenshaw-Curtis. Dense matrices for
differentiation and antidifferentiation are cached on the basis and are
intended for assembling time-stepping operators, not for pointwise use.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numpy.polynomial import chebyshev as cheb

__all__ = [
    "BasisMismatchError",
    "ChebBasis",
    "GridFn",
    "make_basis",
    "differentiate",
    "antiderivative",
    "l2_inner",
    "barycentric_eval",
]

# Differentiation amplifies the coefficient tail by ~n^(2m), so two chop
# levels guard it. MACHINE_CHOP_REL removes bare transform noise and is
# always applied; CHOP_REL (opt-in, for norm measurements) sits above the
# noise floor left behind by a whole spectral operator application and far
# below any signal the decay fits resolve.
MACHINE_CHOP_REL = 5e-15
CHOP_REL = 1e-11


class BasisMismatchError(ValueError):
    """Grid functions on different collocation bases were combined."""


def make_basis(n: int) -> "ChebBasis":
    """Build an n-node Gauss-Lobatto collocation basis on [0, 1]."""
    if int(n) != n or n < 2:
        raise ValueError(f"node count must be an integer >= 2, got {n!r}")
    return ChebBasis(int(n))


@dataclass(frozen=True)
class ChebBasis:
    """Collocation grid with cached transform/derivative matrices."""

    n: int

    @cached_property
    def nodes(self) -> np.ndarray:
        # rho_j = (1 - cos(pi j / N)) / 2, symmetrized so that the endpoints
        # and (for odd n) the midpoint are exact
        N = self.n - 1
        j = np.arange(self.n)
        rho = 0.5 * (1.0 - np.cos(np.pi * j / N))
        half = self.n // 2
        rho[self.n - half:] = 1.0 - rho[:half][::-1]
        if self.n % 2 == 1:
            rho[half] = 0.5
        rho.flags.writeable = False
        return rho

    @cached_property
    def quad_weights(self) -> np.ndarray:
        # exact Clenshaw-Curtis: integrate each cardinal function by pushing
        # the Chebyshev moments of int_0^1 through the inverse transform
        k = np.arange(self.n)
        moments = np.zeros(self.n)
        moments[0::2] = 1.0 / (1.0 - k[0::2] ** 2)
        w = self.coeff_from_values.T @ moments
        w.flags.writeable = False
        return w

    @cached_property
    def values_from_coeff(self) -> np.ndarray:
        # V[j, k] = T_k(x_j) with x_j = cos(pi j / N) = 1 - 2 rho_j
        N = self.n - 1
        jk = np.outer(np.arange(self.n), np.arange(self.n))
        return np.cos(np.pi * jk / N)

    @cached_property
    def coeff_from_values(self) -> np.ndarray:
        # analytic DCT-I inverse of values_from_coeff
        N = self.n - 1
        c = np.ones(self.n)
        c[0] = c[-1] = 2.0
        return (2.0 / N) * self.values_from_coeff / np.outer(c, c)

    @cached_property
    def diff_matrix(self) -> np.ndarray:
        """Dense d/drho in values space (for operator assembly only)."""
        return self.values_from_coeff @ self._diff_coeff_matrix @ self.coeff_from_values

    @cached_property
    def antider_matrix(self) -> np.ndarray:
        """Dense f -> int_0^rho f in values space."""
        return self.values_from_coeff @ self._antider_coeff_matrix @ self.coeff_from_values

    @cached_property
    def _diff_coeff_matrix(self) -> np.ndarray:
        M = np.zeros((self.n, self.n))
        for k in range(self.n):
            e = np.zeros(self.n)
            e[k] = 1.0
            d = cheb.chebder(e, m=1, scl=-2.0)
            M[: d.size, k] = d
        return M

    @cached_property
    def _antider_coeff_matrix(self) -> np.ndarray:
        M = np.zeros((self.n, self.n))
        for k in range(self.n):
            e = np.zeros(self.n)
            e[k] = 1.0
            M[:, k] = cheb.chebint(e, m=1, k=0, lbnd=1.0, scl=-0.5)[: self.n]
        return M

    @cached_property
    def _bary_weights(self) -> np.ndarray:
        w = (-1.0) ** np.arange(self.n)
        w[0] *= 0.5
        w[-1] *= 0.5
        return w

    def to_coeffs(self, values: np.ndarray) -> np.ndarray:
        return self.coeff_from_values @ values

    def to_values(self, coeffs: np.ndarray) -> np.ndarray:
        if coeffs.size < self.n:
            coeffs = np.concatenate([coeffs, np.zeros(self.n - coeffs.size, dtype=coeffs.dtype)])
        return self.values_from_coeff @ coeffs[: self.n]

    def derivative_coeffs(self, coeffs: np.ndarray, order: int = 1,
                          chop: bool = False, chop_floor: float = 0.0) -> np.ndarray:
        """Chebyshev coefficients of the order-th derivative w.r.t. rho.

        Entries below MACHINE_CHOP_REL * max|coeff| are always zeroed first
        (bare transform noise). With chop=True the threshold is raised to
        CHOP_REL, which high-order norm measurements need: one operator
        application leaves a noise tail well above machine level that a
        2k-th derivative would amplify by ~n^(4k). chop_floor sets an
        absolute coefficient floor on top of both, used when the relevant
        scale is that of a reference field rather than of coeffs itself
        (measuring a difference that should vanish).
        """
        if order == 0:
            return np.array(coeffs[: self.n])
        c = np.asarray(coeffs[: self.n])
        top = np.max(np.abs(c))
        if top > 0.0:
            threshold = max((CHOP_REL if chop else MACHINE_CHOP_REL) * top,
                            chop_floor)
            c = np.where(np.abs(c) >= threshold, c, 0.0)
        d = cheb.chebder(c, m=order, scl=-2.0)
        out = np.zeros(self.n, dtype=d.dtype if d.size else c.dtype)
        out[: d.size] = d
        return out


@dataclass(frozen=True)
class GridFn:
    """Samples of a scalar function at the nodes of a ChebBasis."""

    values: np.ndarray
    basis: ChebBasis

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim != 1 or v.size != self.basis.n:
            raise BasisMismatchError(
                f"expected {self.basis.n} samples, got shape {v.shape}"
            )
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, basis: ChebBasis, fn) -> "GridFn":
        return cls(np.asarray(fn(basis.nodes)) + np.zeros(basis.n), basis)

    def coeffs(self) -> np.ndarray:
        return self.basis.to_coeffs(self.values)

    def derivative(self, order: int = 1, chop: bool = False,
                   chop_floor: float = 0.0) -> "GridFn":
        d = self.basis.derivative_coeffs(self.coeffs(), order, chop=chop,
                                         chop_floor=chop_floor)
        return GridFn(self.basis.to_values(d), self.basis)

    def coeff_scale(self) -> float:
        return float(np.max(np.abs(self.coeffs())))

    def antiderivative(self) -> "GridFn":
        c = cheb.chebint(self.coeffs(), m=1, k=0, lbnd=1.0, scl=-0.5)
        return GridFn(self.basis.to_values(c), self.basis)

    def taylor_derivative_at_zero(self, order: int, chop: bool = False) -> complex:
        """d^order/drho^order at rho = 0 from the coefficient series."""
        d = self.basis.derivative_coeffs(self.coeffs(), order, chop=chop)
        return np.sum(d)  # T_k(1) = 1 and rho = 0 maps to x = 1

    def __add__(self, other: "GridFn") -> "GridFn":
        _check_same_basis(self, other)
        return GridFn(self.values + other.values, self.basis)

    def __sub__(self, other: "GridFn") -> "GridFn":
        _check_same_basis(self, other)
        return GridFn(self.values - other.values, self.basis)

    def __mul__(self, scalar) -> "GridFn":
        return GridFn(self.values * scalar, self.basis)

    __rmul__ = __mul__

    def __neg__(self) -> "GridFn":
        return GridFn(-self.values, self.basis)

    def to_csv(self, path) -> None:
        """Write (rho, value) rows, node index ascending in rho."""
        rho = self.basis.nodes
        with open(path, "w") as fh:
            if np.iscomplexobj(self.values):
                fh.write("rho,value_re,value_im\n")
                for r, v in zip(rho, self.values):
                    fh.write(f"{r:.17g},{v.real:.17g},{v.imag:.17g}\n")
            else:
                fh.write("rho,value\n")
                for r, v in zip(rho, self.values):
                    fh.write(f"{r:.17g},{v:.17g}\n")

    def to_json(self, path=None):
        obj = {"rho": list(self.basis.nodes)}
        if np.iscomplexobj(self.values):
            obj["values_re"] = list(self.values.real)
            obj["values_im"] = list(self.values.imag)
        else:
            obj["values"] = list(self.values)
        if path is None:
            return obj
        with open(path, "w") as fh:
            json.dump(obj, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return obj


def _check_same_basis(f: GridFn, g: GridFn) -> None:
    if f.basis is not g.basis and f.basis != g.basis:
        raise BasisMismatchError("grid functions live on different bases")


def differentiate(f: GridFn) -> GridFn:
    """Spectral d/drho, exact for polynomials of degree <= n-1."""
    return f.derivative(1)


def antiderivative(f: GridFn) -> GridFn:
    """F(rho) = int_0^rho f, exact for polynomials of degree <= n-2."""
    return f.antiderivative()


def l2_inner(f: GridFn, g: GridFn) -> complex:
    """Clenshaw-Curtis approximation of int_0^1 f conj(g)."""
    _check_same_basis(f, g)
    val = f.basis.quad_weights @ (f.values * np.conj(g.values))
    return val


def barycentric_eval(f: GridFn, xi: np.ndarray) -> np.ndarray:
    """Evaluate the interpolant of f at arbitrary points xi in [0, 1]."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    rho = f.basis.nodes
    wb = f.basis._bary_weights
    diff = xi[:, None] - rho[None, :]
    out = np.empty(xi.shape, dtype=f.values.dtype)
    hit_row, hit_col = np.nonzero(diff == 0.0)
    safe = np.ones(len(xi), dtype=bool)
    safe[hit_row] = False
    with np.errstate(divide="ignore", invalid="ignore"):
        t = wb[None, :] / diff[safe]
    out[safe] = (t @ f.values) / t.sum(axis=1)
    out[hit_row] = f.values[hit_col]
    return out
