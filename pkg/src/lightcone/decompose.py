"""Higher-order inner products, the analytic-mode kernel, and projections.

The order-2k space carries the inner product (u|v) + (D^2k u | D^2k v).
Its subspace N = ker D^2k (dimension 2k) is spanned by analytic modes;
for any mode m the D^2k term drops out of the inner product, so the
orthogonal projection onto N reduces to a plain L2 Gram system. The
orthogonal remainder u - Pu is orthogonal to N but is generally not a
combination of higher modes; exact modal content of polynomial data is
recovered separately by modal_expansion.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .modes import ModePair, mode_catalogue
from .operators import (Field, ProblemParams, apply_D2k, field_coeff_scale,
                        h_inner, h_norm)
from .spectral import ChebBasis

__all__ = [
    "GramConditionError",
    "Decomposition",
    "MembershipReport",
    "h2k_inner",
    "h2k_norm",
    "nperp_inner",
    "nperp_norm",
    "analytic_basis",
    "project",
    "check_membership",
    "modal_expansion",
]

GRAM_CONDITION_LIMIT = 1e12


class GramConditionError(RuntimeError):
    """Gram system of the mode basis is numerically singular."""


class ModalExpansionError(RuntimeError):
    """Data has content outside the analytic-mode span."""


def h2k_inner(u: Field, v: Field, k: int) -> complex:
    """(u|v)_H + (D^2k u | D^2k v)_H; for k = 0 just the base product."""
    base = h_inner(u, v)
    if k == 0:
        return base
    return base + h_inner(apply_D2k(u, k, chop=True), apply_D2k(v, k, chop=True))


def h2k_norm(u: Field, k: int) -> float:
    return float(np.sqrt(max(h2k_inner(u, u, k).real, 0.0)))


def nperp_inner(u: Field, v: Field, k: int) -> complex:
    """(D^2k u | D^2k v)_H, the inner product used on the remainder sector."""
    return h_inner(apply_D2k(u, k, chop=True), apply_D2k(v, k, chop=True))


def nperp_norm(u: Field, k: int) -> float:
    return float(np.sqrt(max(nperp_inner(u, u, k).real, 0.0)))


def analytic_basis(params: ProblemParams | None, k: int, basis: ChebBasis) -> list[ModePair]:
    """The 2k normalized analytic modes spanning ker D^2k.

    Free problem: modes j = 1..2k (eigenvalues 0, -1, ..., 1-2k).
    Perturbation problem: the eigenvalue pairs of levels j = 0..k-1.
    Each mode is scaled to unit order-2k norm with the leading polynomial
    coefficient of its u2 component positive, so expansion coefficients
    are reproducible.
    """
    if k < 1:
        raise ValueError(f"need k >= 1 for a mode basis, got {k}")
    raw = mode_catalogue(params, basis, 2 * k if params is None else k)
    if len(raw) != 2 * k:
        # eigenvalue ladders collided (p = 5, k >= 3): the kernel is still
        # 2k-dimensional but picks up generalized eigenvectors, which this
        # basis does not represent
        raise ValueError(
            f"analytic eigenvalues collide for p={params.p:g} at k={k}; "
            "only {0} distinct modes exist".format(len(raw))
        )
    out = []
    for m in raw:
        du = np.polynomial.polynomial.polyder(m.profile.coeffs)
        lead = du[np.nonzero(du)[0][-1]] if np.any(du) else 1.0
        sign = 1.0 if lead > 0 else -1.0
        nrm = h2k_norm(m.field, k)
        out.append(m.scaled(sign / nrm))
    return out


@dataclass(frozen=True)
class Decomposition:
    """Mode coefficients plus the orthogonal remainder g = u - Pu."""

    basis_modes: list
    coeffs: np.ndarray
    remainder: Field
    k: int
    problem: str
    gram_condition_number: float

    def reconstruct(self) -> Field:
        out = self.remainder
        for c, m in zip(self.coeffs, self.basis_modes):
            out = out + c * m.field
        return out

    def reconstruction_error(self, u: Field) -> float:
        # the difference field is pure roundoff, so its derivative chop is
        # pinned to the scale of u rather than to the noise itself
        from .spectral import CHOP_REL

        diff = u - self.reconstruct()
        if self.k == 0:
            return h_norm(diff)
        floor = CHOP_REL * field_coeff_scale(u)
        dd = apply_D2k(diff, self.k, chop_floor=floor)
        return float(np.sqrt(h_norm(diff) ** 2 + h_norm(dd) ** 2))

    def orthogonality_residuals(self) -> np.ndarray:
        return np.array([abs(h2k_inner(self.remainder, m.field, self.k))
                         for m in self.basis_modes])

    def to_json(self, path=None, remainder_csv_path: str | None = None):
        coeffs = []
        for c in np.atleast_1d(self.coeffs):
            c = complex(c)
            coeffs.append(c.real if c.imag == 0.0 else {"re": c.real, "im": c.imag})
        obj = {
            "k": self.k,
            "problem": self.problem,
            "coeffs": coeffs,
            "labels": [m.label for m in self.basis_modes],
            "lambdas": [complex(m.lam).real for m in self.basis_modes],
            "remainder_csv_path": remainder_csv_path,
            "gram_condition_number": float(self.gram_condition_number),
        }
        if path is None:
            return obj
        with open(path, "w") as fh:
            json.dump(obj, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return obj


def project(u: Field, k: int, params: ProblemParams | None = None,
            modes: list[ModePair] | None = None) -> Decomposition:
    """Orthogonal projection of u onto the analytic-mode kernel.

    Solves the L2 Gram system for the coefficients of Pu (the order-2k
    product of anything with a kernel mode collapses to the L2 product)
    and validates that the remainder is orthogonal to every mode in the
    full order-2k inner product. The Gram matrix is symmetric positive
    definite and tiny, so a Cholesky solve is used; its condition number
    is recorded and a GramConditionError is raised beyond 1e12.
    """
    if modes is None:
        modes = analytic_basis(params, k, u.basis)
    m = len(modes)
    gram = np.empty((m, m))
    for i in range(m):
        for j in range(i, m):
            gram[i, j] = gram[j, i] = h_inner(modes[j].field, modes[i].field).real
    cond = float(np.linalg.cond(gram))
    if cond > GRAM_CONDITION_LIMIT:
        raise GramConditionError(f"Gram condition number {cond:.3e} exceeds 1e12")
    rhs = np.array([h_inner(u, modes[i].field) for i in range(m)])
    factor = cho_factor(gram)
    if np.iscomplexobj(rhs):
        coeffs = cho_solve(factor, rhs.real) + 1j * cho_solve(factor, rhs.imag)
    else:
        coeffs = cho_solve(factor, rhs)
    g = u
    for c, mp in zip(coeffs, modes):
        g = g - c * mp.field
    return Decomposition(
        basis_modes=modes,
        coeffs=coeffs,
        remainder=g,
        k=k,
        problem="free" if params is None else f"semilinear(p={params.p:g})",
        gram_condition_number=cond,
    )


@dataclass(frozen=True)
class MembershipReport:
    k: int
    conditions: list
    max_residual: float
    passed: bool


def check_membership(u: Field, k: int, tol: float = 1e-8) -> MembershipReport:
    """Residuals of the order-2k boundary conditions at rho = 0."""
    scale = max(h_norm(u), 1e-300)
    conditions = []
    worst = 0.0
    for j in range(k):
        for comp, name, order in ((u.u1, "u1", 2 * j), (u.u2, "u2", 2 * j + 1)):
            val = complex(comp.taylor_derivative_at_zero(order, chop=order >= 2))
            rel = abs(val) / scale
            worst = max(worst, rel)
            conditions.append({
                "component": name,
                "order": order,
                "value": val.real if val.imag == 0.0 else val,
                "relative_residual": rel,
                "pass": bool(rel <= tol),
            })
    return MembershipReport(k=k, conditions=conditions, max_residual=worst,
                            passed=bool(worst <= tol))


def modal_expansion(u: Field, params: ProblemParams | None = None,
                    levels: int | None = None,
                    modes: list[ModePair] | None = None,
                    tol: float = 1e-8):
    """Exact mode coefficients of data lying in the analytic-mode span.

    For polynomial data with odd u1 / even u2 the analytic modes span the
    whole space, so a least-squares solve on the stacked Chebyshev
    coefficient vectors recovers the eigen-expansion exactly. This is the
    projection used when asymptotics demand the true modal content; the
    orthogonal projection of `project` differs from it off the kernel.
    Raises ModalExpansionError when the residual shows content outside
    the span.
    """
    basis = u.basis
    if modes is None:
        if levels is None:
            c1 = u.u1.coeffs()
            c2 = u.u2.coeffs()
            scale = max(np.max(np.abs(c1)), np.max(np.abs(c2)), 1e-300)
            deg = 0
            for c in (c1, c2):
                nz = np.nonzero(np.abs(c) > 1e-10 * scale)[0]
                if nz.size:
                    deg = max(deg, int(nz[-1]))
            levels = deg + 1 if params is None else deg // 2 + 1
        modes = mode_catalogue(params, basis, levels)
        norm_modes = []
        for m in modes:
            norm_modes.append(m.scaled(1.0 / h_norm(m.field)))
        modes = norm_modes
    cap = min(basis.n, max(m.profile.degree for m in modes) + 3)
    cols = []
    for m in modes:
        cols.append(np.concatenate([m.field.u1.coeffs()[:cap],
                                    m.field.u2.coeffs()[:cap]]))
    target = np.concatenate([u.u1.coeffs()[:cap], u.u2.coeffs()[:cap]])
    matrix = np.array(cols).T
    coeffs, *_ = np.linalg.lstsq(matrix, target, rcond=None)
    resid = u
    for c, m in zip(coeffs, modes):
        resid = resid - c * m.field
    err = h_norm(resid)
    scale = max(h_norm(u), 1e-300)
    if err > tol * scale:
        raise ModalExpansionError(
            f"residual {err:.3e} exceeds {tol:.1e} * {scale:.3e}: data is not "
            "a combination of the analytic modes supplied"
        )
    return coeffs, modes


def kernel_dimension_check(params: ProblemParams | None, k: int,
                           basis: ChebBasis) -> dict:
    """Report that the mode basis spans a 2k-dimensional space annihilated
    by D^2k and that the next mode up the ladder escapes the kernel."""
    modes = analytic_basis(params, k, basis)
    gram = np.array([[h_inner(m2.field, m1.field).real for m2 in modes]
                     for m1 in modes])
    extra = mode_catalogue(params, basis, (2 * k + 1) if params is None else (k + 1))[-1]
    extra_seminorm = nperp_norm(extra.field, k) / h_norm(extra.field)
    return {
        "dim": len(modes),
        "gram_condition_number": float(np.linalg.cond(gram)),
        "gram_determinant": float(np.linalg.det(gram)),
        "kernel_seminorms": [nperp_norm(m.field, k) for m in modes],
        "next_mode_seminorm": float(extra_seminorm),
    }
