"""Analytic eigenvalues and eigenfunctions of the evolution generators.

Mode solutions e^(lambda tau) u(rho) of the first-order system are built
from scalar profiles u solving the singular ODE

    -(1 - rho^2) u'' + 2 lambda rho u' + [lambda (lambda - 1) - pc0] u = 0

with u(0) = 0, via the assembly u1 = rho u' + (lambda - 1) u, u2 = u'.
For the free problem (pc0 = 0) closed forms exist for every lambda; for
the perturbation problem the analytic (polynomial) branch is produced by
a terminating odd power series around rho = 0.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from numpy.polynomial import polynomial as npoly

from .operators import Field, ProblemParams, apply_L, h_norm
from .spectral import ChebBasis, GridFn

__all__ = [
    "NonTerminatingError",
    "ModeResidualError",
    "ScalarProfile",
    "ModePair",
    "free_eigenvalue",
    "free_profile",
    "free_profile_polynomial",
    "assemble_pair",
    "semilinear_eigenvalues",
    "semilinear_eigenvalues_exact",
    "frobenius_polynomial",
    "eigenvalue_scan",
    "continuum_eigenfunction",
    "continuum_pointwise_residual",
    "mode_catalogue",
    "catalogue_to_json",
]

DEGREE_CAP_DEFAULT = 81


class NonTerminatingError(RuntimeError):
    """The power series did not terminate: lambda is not an analytic eigenvalue."""

    def __init__(self, lam, degree_cap):
        super().__init__(
            f"series for lambda = {lam} has no polynomial truncation up to "
            f"degree {degree_cap}"
        )
        self.lam = lam
        self.degree_cap = degree_cap


class ModeResidualError(RuntimeError):
    """Assembled mode fails the eigen-equation residual check."""


@dataclass(frozen=True)
class ScalarProfile:
    """Polynomial profile u(rho) in the monomial basis, plus its eigenvalue."""

    coeffs: np.ndarray  # ascending monomial coefficients
    lam: float

    def __post_init__(self):
        object.__setattr__(self, "coeffs", np.atleast_1d(np.asarray(self.coeffs)))

    def __call__(self, rho):
        return npoly.polyval(np.asarray(rho), self.coeffs)

    @property
    def degree(self) -> int:
        nz = np.nonzero(self.coeffs)[0]
        return int(nz[-1]) if nz.size else 0

    @property
    def is_odd(self) -> bool:
        return not np.any(self.coeffs[0::2])


@dataclass(frozen=True)
class ModePair:
    """Eigenvalue with its first-order-system eigenfunction."""

    lam: complex
    field: Field
    label: str
    profile: ScalarProfile | None = None
    normalization: float = 1.0

    def scaled(self, factor: float) -> "ModePair":
        return ModePair(self.lam, self.field * factor, self.label,
                        self.profile, self.normalization * factor)


def free_eigenvalue(j: int) -> float:
    """Eigenvalue of the j-th analytic free mode, j >= 1."""
    if j < 1:
        raise ValueError(f"mode index must be >= 1, got {j}")
    return float(1 - j)


def free_profile(lam):
    """Closed-form scalar profile of the free problem, any eigenvalue.

    Returns the evaluator rho -> (1 - rho)^(1 - lam) - (1 + rho)^(1 - lam).
    For lam = 1 - j with integer j >= 1 this is the odd polynomial also
    available exactly from free_profile_polynomial.
    """
    lam_c = complex(lam)
    a = 1.0 - lam_c if lam_c.imag != 0.0 else 1.0 - lam_c.real

    def u(rho):
        return _safe_pow(1.0 - np.asarray(rho, dtype=float), a) \
            - _safe_pow(1.0 + np.asarray(rho, dtype=float), a)

    return u


def _safe_pow(base, expo):
    """base**expo with the limit 0**e = 0 for Re e > 0 (nan otherwise)."""
    base = np.asarray(base, dtype=float)
    if isinstance(expo, complex):
        base = base.astype(complex)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = base ** expo
    zero = np.abs(base) == 0.0
    if np.any(zero):
        if np.real(expo) > 0:
            out = np.where(zero, 0.0, out)
        elif expo == 0:
            out = np.where(zero, 1.0, out)
        else:
            out = np.where(zero, np.nan, out)
    return out


def free_profile_polynomial(j: int) -> ScalarProfile:
    """Exact odd polynomial (1-rho)^j - (1+rho)^j for the j-th free mode."""
    if j < 1:
        raise ValueError(f"mode index must be >= 1, got {j}")
    coeffs = np.zeros(j + 1)
    for m in range(1, j + 1, 2):
        coeffs[m] = -2.0 * math.comb(j, m)
    return ScalarProfile(coeffs, free_eigenvalue(j))


def assemble_pair(profile: ScalarProfile, lam: float, basis: ChebBasis,
                  params: ProblemParams | None = None, label: str = "",
                  residual_tol: float = 1e-10) -> ModePair:
    """Lift a scalar profile to the first-order system and verify it.

    u1 = rho u' + (lam - 1) u and u2 = u'. The eigen-equation residual
    ||L field - lam field||_H is checked against residual_tol (relative to
    max(1, ||field||)); violations raise ModeResidualError.
    """
    du = npoly.polyder(profile.coeffs)
    u1c = npoly.polyadd(npoly.polymulx(du), (lam - 1.0) * profile.coeffs)
    rho = basis.nodes
    field = Field(
        GridFn(npoly.polyval(rho, u1c), basis),
        GridFn(npoly.polyval(rho, du) + np.zeros(basis.n), basis),
    )
    residual = h_norm(apply_L(field, params) - lam * field)
    if residual > residual_tol * max(1.0, h_norm(field)):
        raise ModeResidualError(
            f"mode lambda={lam} residual {residual:.3e} exceeds {residual_tol:.1e}"
        )
    return ModePair(lam, field, label or f"lambda({lam})", profile)


def semilinear_eigenvalues(params: ProblemParams, j: int) -> tuple[float, float]:
    """The analytic eigenvalue pair (lambda_j^+, lambda_j^-) of level j >= 0."""
    if j < 0:
        raise ValueError(f"level must be >= 0, got {j}")
    if params.is_odd_integer:
        lp, lm = semilinear_eigenvalues_exact(params, j)
        return float(lp), float(lm)
    return (1.0 + 2.0 / (params.p - 1.0) - 2.0 * j,
            -2.0 * params.p / (params.p - 1.0) - 2.0 * j)


def semilinear_eigenvalues_exact(params: ProblemParams, j: int) -> tuple[Fraction, Fraction]:
    p = int(params.p)
    return (1 + Fraction(2, p - 1) - 2 * j, -Fraction(2 * p, p - 1) - 2 * j)


def frobenius_polynomial(params: ProblemParams | None, lam,
                         degree_cap: int = DEGREE_CAP_DEFAULT) -> ScalarProfile:
    """Terminating odd power series solution of the mode ODE.

    Builds u = sum_m a_m rho^(2m+1) with a_0 = 1 and

        a_{m+1} = a_m [(2m+1)(2m+2 lam) + lam(lam-1) - pc0]
                     / ((2m+2)(2m+3)),

    returning the polynomial as soon as a numerator vanishes. For odd
    integer p the recurrence runs in exact rational arithmetic (rational
    eigenvalue candidates terminate exactly); otherwise a floating
    threshold of 1e-12 decides termination. Raises NonTerminatingError if
    no numerator vanishes up to degree_cap.
    """
    if degree_cap < 1 or degree_cap % 2 == 0:
        raise ValueError(f"degree cap must be odd and >= 1, got {degree_cap}")
    exact = params is None or params.is_odd_integer
    if exact:
        lam_x = Fraction(lam).limit_denominator(10 ** 9)
        if abs(float(lam_x) - float(lam)) > 1e-12 * max(1.0, abs(float(lam))):
            exact = False
    if exact:
        lam_v = lam_x
        pc0 = Fraction(0) if params is None else params.pc0_exact
        coeffs = [Fraction(1)]
    else:
        lam_v = float(lam)
        pc0 = 0.0 if params is None else params.pc0
        coeffs = [1.0]
    for m in range((degree_cap - 1) // 2 + 1):
        numerator = (2 * m + 1) * (2 * m + 2 * lam_v) + lam_v * (lam_v - 1) - pc0
        if exact:
            done = numerator == 0
        else:
            scale = max(1.0, abs((2 * m + 1) * (2 * m + 2 * lam_v)),
                        abs(lam_v * (lam_v - 1) - pc0))
            done = abs(numerator) <= 1e-12 * scale
        if done:
            out = np.zeros(2 * m + 2)
            out[1::2] = [float(c) for c in coeffs]
            return ScalarProfile(out, float(lam))
        coeffs.append(coeffs[-1] * numerator / ((2 * m + 2) * (2 * m + 3)))
    raise NonTerminatingError(lam, degree_cap)


def eigenvalue_scan(params: ProblemParams, j_max: int,
                    window: tuple[float, float] | None = None) -> list[float]:
    """Roots of the series-termination condition for levels j <= j_max.

    The numerator at index j vanishes iff

        lambda^2 + (4j+1) lambda + 2j(2j+1) - pc0 = 0,

    whose two real roots reproduce the analytic eigenvalue pair of level j.
    """
    out = []
    for j in range(j_max + 1):
        if params.is_odd_integer:
            # discriminant 1 + 4 pc0 = ((3p+1)/(p-1))^2 is a perfect square
            p = int(params.p)
            root = Fraction(3 * p + 1, p - 1)
            lam_p = (-(4 * j + 1) + root) / 2
            lam_m = (-(4 * j + 1) - root) / 2
            pair = (float(lam_p), float(lam_m))
        else:
            disc = math.sqrt(1.0 + 4.0 * params.pc0)
            pair = ((-(4 * j + 1) + disc) / 2.0, (-(4 * j + 1) - disc) / 2.0)
        out.extend(pair)
    if window is not None:
        lo, hi = window
        out = [v for v in out if lo <= v <= hi]
    return out


def continuum_eigenfunction(lam: complex, basis: ChebBasis) -> ModePair:
    """Eigenfunction of the free generator for any Re lambda < 1/2.

    Built from the closed-form profile; not smooth at rho = 1 in general,
    so the eigen-equation is validated pointwise on the interior (see
    continuum_pointwise_residual) rather than by a global spectral
    residual. For lambda on the nonpositive integers the analytic
    polynomial mode is returned instead.
    """
    lam = complex(lam)
    if lam.real >= 0.5:
        raise ValueError(
            f"Re lambda = {lam.real} >= 1/2: profile is not square integrable"
        )
    if abs(lam.imag) < 1e-12 and abs(lam.real - round(lam.real)) < 1e-12 \
            and round(lam.real) <= 0:
        j = 1 - int(round(lam.real))
        return assemble_pair(free_profile_polynomial(j), float(1 - j), basis,
                             label=f"free({j})")
    a = 1.0 - lam
    rho = basis.nodes
    u = _safe_pow(1.0 - rho, a) - _safe_pow(1.0 + rho, a)
    du = -a * (_safe_pow(1.0 - rho, a - 1.0) + _safe_pow(1.0 + rho, a - 1.0))
    u1 = rho * du + (lam - 1.0) * u
    field = Field(GridFn(u1, basis), GridFn(du, basis))
    return ModePair(lam, field, label=f"continuum({lam})")


def continuum_pointwise_residual(lam: complex, rho: np.ndarray) -> np.ndarray:
    """Max abs of the eigen-equation residual at the given points.

    Derivatives of the closed-form profile are evaluated analytically, so
    this checks the algebraic identity in floating point rather than the
    quality of a grid representation.
    """
    lam = complex(lam)
    a = 1.0 - lam
    rho = np.asarray(rho, dtype=float)
    u = _safe_pow(1.0 - rho, a) - _safe_pow(1.0 + rho, a)
    du = -a * (_safe_pow(1.0 - rho, a - 1.0) + _safe_pow(1.0 + rho, a - 1.0))
    d2u = a * (a - 1.0) * (_safe_pow(1.0 - rho, a - 2.0) - _safe_pow(1.0 + rho, a - 2.0))
    # first component of L0 u - lam u with u1 = rho u' + (lam-1) u, u2 = u'
    res1 = (1.0 - rho ** 2) * d2u - 2.0 * lam * rho * du - lam * (lam - 1.0) * u
    # second component: u1' - rho u2' - lam u2 with u1' = lam u' + rho u''
    res2 = (lam * du + rho * d2u) - rho * d2u - lam * du
    return np.maximum(np.abs(res1), np.abs(res2))


def mode_catalogue(params: ProblemParams | None, basis: ChebBasis,
                   levels: int) -> list[ModePair]:
    """Unnormalized analytic modes: free ladder j=1..levels, or the
    semilinear pairs of levels j=0..levels-1.

    Coinciding eigenvalues are listed once. The two semilinear ladders can
    collide (for p=5 the minus ladder repeats the plus ladder two levels
    up); the repeated value carries a single analytic mode, terminating at
    the earlier level's degree.
    """
    out = []
    if params is None:
        for j in range(1, levels + 1):
            out.append(assemble_pair(free_profile_polynomial(j), float(1 - j),
                                     basis, label=f"free({j})"))
    else:
        seen = set()
        for j in range(levels):
            lam_p, lam_m = semilinear_eigenvalues(params, j)
            for lam, tag in ((lam_p, f"plus({j})"), (lam_m, f"minus({j})")):
                key = round(lam, 9)
                if key in seen:
                    continue
                seen.add(key)
                prof = frobenius_polynomial(params, lam)
                out.append(assemble_pair(prof, lam, basis, params=params, label=tag))
    return out


def catalogue_to_json(modes: list[ModePair], path=None):
    """Export {label, lambda, polynomial coefficients, normalization}."""
    entries = []
    for m in modes:
        entries.append({
            "label": m.label,
            "lambda": _num(m.lam),
            "profile_coefficients": [float(c) for c in m.profile.coeffs]
            if m.profile is not None else None,
            "normalization_factor": float(m.normalization),
        })
    if path is None:
        return entries
    with open(path, "w") as fh:
        json.dump(entries, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return entries


def _num(v):
    v = complex(v)
    if v.imag == 0.0:
        return v.real
    return {"re": v.real, "im": v.imag}
