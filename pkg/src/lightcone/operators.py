"""Generators of the similarity-coordinate evolution and related forms.

The state is a pair (u1, u2) of grid functions on [0, 1]. The free-wave
generator is

    L0 u = (-rho u1' + u2',  u1' - rho u2')

restricted to pairs with u1(0) = 0; the perturbation problem adds the
bounded integral term L' u = (pc0 * int_0^rho u2, 0). No condition is
imposed at rho = 1 because the characteristic speeds -rho +- 1 are
outgoing there.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .spectral import BasisMismatchError, ChebBasis, GridFn, antiderivative, l2_inner

__all__ = [
    "Field",
    "ProblemParams",
    "H2kField",
    "ResolventResidualError",
    "apply_L0",
    "apply_Lprime",
    "apply_L",
    "apply_D2k",
    "resolvent_at_one",
    "energy_form",
    "h_inner",
    "h_norm",
    "generator_matrix",
    "export_matrix_csv",
]


class ResolventResidualError(RuntimeError):
    """The reconstructed resolvent solution fails to solve (1 - L0)u = f."""


@dataclass(frozen=True)
class ProblemParams:
    """Nonlinearity exponent p and the derived potential strength.

    The potential multiplying the perturbation is pc0 = 2 p (p+1) / (p-1)^2,
    the linearization of the power nonlinearity around the spatially flat
    self-similar blowup profile. By default p must be an odd integer >= 3;
    pass allow_real_p=True to unlock any real p > 1 (the formulas extend,
    but that regime is outside the validated scope and a warning is issued).
    """

    p: float
    k: int = 1
    allow_real_p: bool = False

    def __post_init__(self):
        object.__setattr__(self, "p", float(self.p))
        if self.allow_real_p:
            if not self.p > 1:
                raise ValueError(f"p must exceed 1, got {self.p}")
            if not self.is_odd_integer:
                warnings.warn(
                    f"p = {self.p} is not an odd integer >= 3; results are "
                    "outside the validated scope",
                    stacklevel=2,
                )
        else:
            if not self.is_odd_integer:
                raise ValueError(
                    f"p must be an odd integer >= 3 (got {self.p}); "
                    "use allow_real_p to override"
                )
        if not 0 <= self.k <= 4:
            raise ValueError(f"Sobolev index k must be in 0..4, got {self.k}")

    @property
    def is_odd_integer(self) -> bool:
        return float(self.p) == int(self.p) and int(self.p) % 2 == 1 and self.p >= 3

    @property
    def pc0(self) -> float:
        return 2.0 * self.p * (self.p + 1.0) / (self.p - 1.0) ** 2

    @property
    def pc0_exact(self) -> Fraction:
        if not self.is_odd_integer:
            raise ValueError("exact potential strength needs integer p")
        p = int(self.p)
        return Fraction(2 * p * (p + 1), (p - 1) ** 2)


def pc0_of(params: ProblemParams | None) -> float:
    return 0.0 if params is None else params.pc0


@dataclass(frozen=True)
class Field:
    """State pair (u1, u2) sharing one collocation basis."""

    u1: GridFn
    u2: GridFn

    def __post_init__(self):
        if self.u1.basis != self.u2.basis:
            raise BasisMismatchError("field components live on different bases")

    @property
    def basis(self) -> ChebBasis:
        return self.u1.basis

    @classmethod
    def from_values(cls, basis: ChebBasis, v1, v2) -> "Field":
        return cls(GridFn(np.asarray(v1) + np.zeros(basis.n), basis),
                   GridFn(np.asarray(v2) + np.zeros(basis.n), basis))

    @classmethod
    def from_stacked(cls, basis: ChebBasis, vec: np.ndarray) -> "Field":
        n = basis.n
        return cls(GridFn(vec[:n], basis), GridFn(vec[n:], basis))

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.u1.values, self.u2.values])

    def __add__(self, other: "Field") -> "Field":
        return Field(self.u1 + other.u1, self.u2 + other.u2)

    def __sub__(self, other: "Field") -> "Field":
        return Field(self.u1 - other.u1, self.u2 - other.u2)

    def __mul__(self, scalar) -> "Field":
        return Field(self.u1 * scalar, self.u2 * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> "Field":
        return Field(-self.u1, -self.u2)

    def to_csv(self, path) -> None:
        rho = self.basis.nodes
        v1, v2 = self.u1.values, self.u2.values
        complex_data = np.iscomplexobj(v1) or np.iscomplexobj(v2)
        with open(path, "w") as fh:
            if complex_data:
                fh.write("rho,u1_re,u1_im,u2_re,u2_im\n")
                for r, a, b in zip(rho, v1.astype(complex), v2.astype(complex)):
                    fh.write(f"{r:.17g},{a.real:.17g},{a.imag:.17g},"
                             f"{b.real:.17g},{b.imag:.17g}\n")
            else:
                fh.write("rho,u1,u2\n")
                for r, a, b in zip(rho, v1, v2):
                    fh.write(f"{r:.17g},{a:.17g},{b:.17g}\n")


def h_inner(u: Field, v: Field) -> complex:
    """Inner product of the base space, componentwise L2(0,1)."""
    return l2_inner(u.u1, v.u1) + l2_inner(u.u2, v.u2)


def h_norm(u: Field) -> float:
    return float(np.sqrt(max(h_inner(u, u).real, 0.0)))


def apply_L0(u: Field) -> Field:
    """Free-wave generator; exact for polynomial inputs.

    The caller is responsible for u1(0) = 0 when the result is meant to
    represent generator action on admissible data.
    """
    d1 = u.u1.derivative()
    d2 = u.u2.derivative()
    rho = u.basis.nodes
    return Field(
        GridFn(-rho * d1.values + d2.values, u.basis),
        GridFn(d1.values - rho * d2.values, u.basis),
    )


def apply_Lprime(u: Field, params: ProblemParams) -> Field:
    """Potential term: (pc0 * int_0^rho u2, 0)."""
    integral = antiderivative(u.u2)
    return Field(
        GridFn(params.pc0 * integral.values, u.basis),
        GridFn(np.zeros_like(u.u2.values), u.basis),
    )


def apply_L(u: Field, params: ProblemParams | None) -> Field:
    """Full generator L0 + L'; with params None (pc0 = 0) this is L0."""
    out = apply_L0(u)
    if params is None:
        return out
    return out + apply_Lprime(u, params)


def apply_D2k(u: Field, k: int, chop: bool = False, chop_floor: float = 0.0) -> Field:
    """Componentwise derivative of order 2k (identity for k = 0).

    chop=True raises the coefficient chop to the measurement level, which
    norm evaluations of evolved states need (their coefficient noise floor
    sits well above machine level and a 2k-th derivative amplifies it by
    ~n^(4k)); identity checks on clean polynomial data should leave it off
    so that near-threshold top-degree content survives. chop_floor pins
    the chop to an external reference scale instead.
    """
    n = u.basis.n
    if 2 * k >= n:
        raise ValueError(f"need 2k < n, got k={k} with n={n}")
    if k == 0:
        return u
    return Field(u.u1.derivative(2 * k, chop=chop, chop_floor=chop_floor),
                 u.u2.derivative(2 * k, chop=chop, chop_floor=chop_floor))


def field_coeff_scale(u: Field) -> float:
    """Largest coefficient magnitude across both components."""
    return max(u.u1.coeff_scale(), u.u2.coeff_scale())


def resolvent_at_one(f: Field, tol: float = 1e-8) -> Field:
    """Solve (1 - L0) u = f by the explicit quadrature formula.

    u2 = (1 - rho^2)^(-1) int_rho^1 F with F = f1 + rho f2 + int_0^rho f2,
    and u1 = rho u2 - int_0^rho f2. The removable singularity at rho = 1
    is evaluated by its limit u2(1) = F(1)/2. Raises ResolventResidualError
    when the residual of the reconstructed solution exceeds tol, which
    signals under-resolved input.
    """
    basis = f.basis
    rho = basis.nodes
    int_f2 = antiderivative(f.u2)
    F = f.u1.values + rho * f.u2.values + int_f2.values
    IF = antiderivative(GridFn(F, basis))
    tail = IF.values[-1] - IF.values  # int_rho^1 F
    den = (1.0 - rho) * (1.0 + rho)
    u2 = np.empty_like(tail)
    u2[:-1] = tail[:-1] / den[:-1]
    u2[-1] = F[-1] / 2.0
    u1 = rho * u2 - int_f2.values
    u = Field(GridFn(u1, basis), GridFn(u2, basis))
    residual = h_norm((u - apply_L0(u)) - f)
    scale = max(1.0, h_norm(f))
    if residual > tol * scale:
        raise ResolventResidualError(
            f"resolvent residual {residual:.3e} exceeds {tol:.1e} * {scale:.3e}; "
            "raise the node count"
        )
    return u


def energy_form(u: Field, op: str = "L0", inner: str = "H",
                params: ProblemParams | None = None, k: int = 1) -> float:
    """Re (op u | u) in the requested inner product.

    op is "L0" or "L" (the latter needs params); inner is "H", "H2k" or
    "Nperp", the last two parameterized by k.
    """
    if op == "L0":
        lu = apply_L0(u)
    elif op == "L":
        if params is None:
            raise ValueError('op "L" requires params')
        lu = apply_L(u, params)
    else:
        raise ValueError(f"unknown operator tag {op!r}")
    if inner == "H":
        return h_inner(lu, u).real
    if inner == "H2k":
        return (h_inner(lu, u) + h_inner(apply_D2k(lu, k, chop=True),
                                         apply_D2k(u, k, chop=True))).real
    if inner == "Nperp":
        return h_inner(apply_D2k(lu, k, chop=True), apply_D2k(u, k, chop=True)).real
    raise ValueError(f"unknown inner-product tag {inner!r}")


def generator_matrix(basis: ChebBasis, params: ProblemParams | None = None,
                     constrained: bool = True) -> np.ndarray:
    """Dense 2n x 2n generator acting on the stacked vector [u1; u2].

    With constrained=True the u1 equation at rho = 0 is replaced by the
    constraint row d u1(0)/dtau = 0, which keeps u1(0) = 0 to machine
    precision through every time-step stage.
    """
    n = basis.n
    D = basis.diff_matrix
    RD = basis.nodes[:, None] * D
    A = np.zeros((2 * n, 2 * n))
    A[:n, :n] = -RD
    A[:n, n:] = D
    A[n:, :n] = D
    A[n:, n:] = -RD
    if params is not None and params.pc0 != 0.0:
        A[:n, n:] += params.pc0 * basis.antider_matrix
    if constrained:
        A[0, :] = 0.0
    return A


def export_matrix_csv(matrix: np.ndarray, path) -> None:
    """Row-major CSV dump of a dense operator, full double precision."""
    with open(path, "w") as fh:
        for row in np.atleast_2d(matrix):
            fh.write(",".join(f"{v:.17g}" for v in row))
            fh.write("\n")


@dataclass(frozen=True)
class H2kField:
    """A field checked against the order-2k boundary conditions at rho = 0.

    Membership requires u1^(2j)(0) = 0 and u2^(2j+1)(0) = 0 for all j < k.
    The conditions are checked (relative tolerance tol), not enforced by
    projection.
    """

    field: Field
    k: int
    tol: float = 1e-8

    def __post_init__(self):
        res = self.boundary_residuals()
        scale = max(h_norm(self.field), 1e-300)
        worst = max((abs(v) for v in res.values()), default=0.0)
        if worst > self.tol * scale:
            raise ValueError(
                f"field violates order-{2 * self.k} boundary conditions: "
                f"max residual {worst:.3e} > {self.tol:.1e} * {scale:.3e}"
            )

    def boundary_residuals(self) -> dict:
        out = {}
        for j in range(self.k):
            out[f"u1^({2 * j})(0)"] = complex(self.field.u1.taylor_derivative_at_zero(2 * j))
            out[f"u2^({2 * j + 1})(0)"] = complex(self.field.u2.taylor_derivative_at_zero(2 * j + 1))
        return out
