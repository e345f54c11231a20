"""Decay-rate extraction and quantitative verification reports.

Exponential bounds become measurable slopes: fit log(norm) against tau by
least squares over a late-time window and compare with the predicted
exponent. Remainder decay is measured in the D^2k seminorm, which is the
quantity the energy estimate on the remainder sector actually controls
(the plain orthogonal remainder re-acquires kernel content as it evolves,
so its full order-2k norm levels off at the slowest kernel rate).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .decompose import analytic_basis, modal_expansion
from .evolve import EvolutionOperator, evolve_decomposed
from .modes import mode_catalogue, semilinear_eigenvalues
from .operators import Field, ProblemParams, h_norm
from .spectral import ChebBasis, GridFn, make_basis

__all__ = [
    "DecayReport",
    "fit_rate",
    "random_parity_field",
    "random_admissible_field",
    "random_mode_combination",
    "verify_free_theorem",
    "verify_semilinear_theorem",
    "verify_linear_stability",
    "stability_rate",
]

UNDERFLOW_FLOOR = 1e-280
DATA_DEGREE = 12


@dataclass
class DecayReport:
    """Fitted slope of a norm series against a theoretical exponent.

    fitted_rate is None when the series sat at the measurement floor and
    no slope could be extracted (decay bounds hold trivially there).
    """

    fitted_rate: float | None
    window: tuple
    bound: float | None
    residual: float
    verdict: str
    n_samples: int
    truncated: bool = False

    def to_dict(self) -> dict:
        return {
            "fitted_rate": self.fitted_rate,
            "window": list(self.window),
            "bound": self.bound,
            "residual": self.residual,
            "verdict": self.verdict,
            "n_samples": self.n_samples,
            "truncated": self.truncated,
        }


def fit_rate(taus, norms, window=None, bound=None, tol=0.1,
             check="upper") -> DecayReport:
    """Least-squares slope of log(norm) over the window.

    check="upper" passes when rate <= bound + tol, check="match" when
    |rate - bound| <= tol; with bound=None the verdict is "n/a". Samples
    below the underflow floor truncate the window (noted in the report).
    """
    taus = np.asarray(taus, dtype=float)
    norms = np.asarray(norms, dtype=float)
    if window is None:
        window = (taus[0], taus[-1])
    mask = (taus >= window[0]) & (taus <= window[1])
    # samples at or below the underflow floor (including exact zeros from
    # the measurement chop) truncate the window
    keep = mask & (norms > UNDERFLOW_FLOOR)
    truncated = bool(np.count_nonzero(keep) < np.count_nonzero(mask))
    t = taus[keep]
    y = np.log(norms[keep])
    if t.size < 10:
        raise ValueError(f"need at least 10 samples in the window, got {t.size}")
    slope, intercept = np.polyfit(t, y, 1)
    rms = float(np.sqrt(np.mean((slope * t + intercept - y) ** 2)))
    if bound is None:
        verdict = "n/a"
    elif check == "upper":
        verdict = "pass" if slope <= bound + tol else "fail"
    elif check == "match":
        verdict = "pass" if abs(slope - bound) <= tol else "fail"
    else:
        raise ValueError(f"unknown check mode {check!r}")
    return DecayReport(float(slope), (float(window[0]), float(window[1])),
                       bound, rms, verdict, int(t.size), truncated)


def fit_remainder_series(taus, norms, prefer_window, bound, tol=0.1,
                         floor_scale: float = 0.0) -> DecayReport:
    """Upper-bound rate fit that tolerates a series dying mid-window.

    Fast remainders can fall below the measurement floor before the
    preferred late-time window opens; the fit then slides back to the last
    stretch of live samples. A series that is dead from the start (at most
    a few live samples, all tiny against floor_scale) trivially satisfies
    a decay bound and is reported as such.
    """
    taus = np.asarray(taus, dtype=float)
    norms = np.asarray(norms, dtype=float)
    live = norms > UNDERFLOW_FLOOR
    if floor_scale > 0.0:
        live &= norms > 1e-13 * floor_scale
    n_live = int(np.count_nonzero(live))
    if n_live < 10:
        # remainder sits at the measurement floor throughout: any decay
        # bound holds trivially
        return DecayReport(None, tuple(prefer_window), bound, 0.0,
                           "pass", n_live, truncated=True)
    last_live = taus[live][-1]
    lo, hi = prefer_window
    if last_live < hi:
        span = hi - lo
        hi = last_live
        lo = max(taus[live][0], hi - span)
    report = fit_rate(taus[live], norms[live], window=(lo, hi), bound=bound,
                      tol=tol, check="upper")
    if last_live < prefer_window[1]:
        report.truncated = True
    return report


def random_parity_field(basis: ChebBasis, rng: np.random.Generator,
                        degree: int = DATA_DEGREE, normalize: bool = True) -> Field:
    """Polynomial pair with odd u1 / even u2, degree <= degree.

    The parity makes every order-2k boundary condition at rho = 0 hold by
    construction.
    """
    rho = basis.nodes
    u1 = np.zeros(basis.n)
    u2 = np.zeros(basis.n)
    for m in range(1, degree + 1, 2):
        u1 = u1 + rng.standard_normal() / (1.0 + m) * rho ** m
    for m in range(0, degree + 1, 2):
        u2 = u2 + rng.standard_normal() / (1.0 + m) * rho ** m
    f = Field(GridFn(u1, basis), GridFn(u2, basis))
    if normalize:
        f = f * (1.0 / h_norm(f))
    return f


def random_admissible_field(basis: ChebBasis, rng: np.random.Generator,
                            degree: int = DATA_DEGREE, normalize: bool = True) -> Field:
    """Polynomial pair with u1(0) = 0 only (no parity structure)."""
    rho = basis.nodes
    u1 = np.zeros(basis.n)
    u2 = np.zeros(basis.n)
    for m in range(1, degree + 1):
        u1 = u1 + rng.standard_normal() / (1.0 + m) * rho ** m
    for m in range(0, degree + 1):
        u2 = u2 + rng.standard_normal() / (1.0 + m) * rho ** m
    f = Field(GridFn(u1, basis), GridFn(u2, basis))
    if normalize:
        f = f * (1.0 / h_norm(f))
    return f


def random_mode_combination(params: ProblemParams | None, basis: ChebBasis,
                            rng: np.random.Generator, degree: int = DATA_DEGREE,
                            dominant_lambda: float | None = None,
                            dominant_min: float = 0.3):
    """Random combination of analytic modes up to the degree cap.

    Coefficients decay geometrically with the level so the kernel modes
    dominate generically. When dominant_lambda is given, the coefficient
    of that mode is pushed away from zero (the sharpness checks need the
    dominant retained mode present). Returns (field, coeffs, modes).
    """
    levels = degree + 1 if params is None else (degree - 1) // 2 + 1
    modes = mode_catalogue(params, basis, levels)
    modes = [m.scaled(1.0 / h_norm(m.field)) for m in modes]
    coeffs = np.array([rng.standard_normal() * 0.7 ** i for i in range(len(modes))])
    if dominant_lambda is not None:
        idx = int(np.argmin([abs(complex(m.lam).real - dominant_lambda) for m in modes]))
        if abs(coeffs[idx]) < dominant_min:
            coeffs[idx] = dominant_min if coeffs[idx] >= 0 else -dominant_min
    field = None
    for c, m in zip(coeffs, modes):
        term = c * m.field
        field = term if field is None else field + term
    scale = 1.0 / h_norm(field)
    return field * scale, coeffs * scale, modes


def _dominant_eigenvalue(coeffs, modes, floor: float = 1e-8) -> float:
    lams = [complex(m.lam).real for m in modes]
    present = [lam for c, lam in zip(coeffs, lams) if abs(c) > floor]
    return max(present)


def verify_free_theorem(k: int, n: int = 64, seed: int = 0,
                        tau_end: float | None = None, u0: Field | None = None,
                        record_dt: float = 0.05) -> dict:
    """Decomposition theorem for the free evolution at index k.

    Checks, on seeded random mode data: (a) the remainder seminorm decays
    no slower than the 1/2 - 2k bound (+0.1 fit slack), (b) the late-time
    rate of the full solution matches the largest populated eigenvalue
    within 0.05, (c) recombining the analytic mode evolution with the
    numerically evolved remainder reproduces the direct evolution.
    """
    # the remainder seminorm is fitted early, before it reaches the
    # differentiation noise floor (fast for k = 2); the full-solution rate
    # needs a late window where subdominant modes have died out
    if tau_end is None:
        tau_end = 6.0 if k <= 1 else 4.0
    full_horizon = max(tau_end, 6.0)
    basis = make_basis(n)
    rng = np.random.default_rng(seed)
    if u0 is None:
        u0, eig_coeffs, eig_modes = random_mode_combination(None, basis, rng,
                                                            dominant_lambda=0.0)
    else:
        eig_coeffs, eig_modes = modal_expansion(u0, None)
    ed = evolve_decomposed(u0, k, None, tau_end=full_horizon, record_dt=record_dt)
    bound = 0.5 - 2.0 * k
    remainder_report = fit_remainder_series(ed.taus, ed.remainder.norms["Nperp"],
                                            (tau_end / 2.0, tau_end), bound,
                                            floor_scale=ed.remainder.norms["Nperp"][0])
    dominant = _dominant_eigenvalue(eig_coeffs, eig_modes)
    late_window = (full_horizon - 2.0, full_horizon)
    full_report = fit_rate(ed.taus, ed.direct.norms["H2k"], window=late_window,
                           bound=dominant, tol=0.05, check="match")
    recomb = float(np.max(ed.consistency_H))
    recomb_pass = recomb < 1e-5
    passed = (remainder_report.verdict == "pass"
              and full_report.verdict == "pass" and recomb_pass)
    return {
        "problem": "free",
        "p": None,
        "k": k,
        "n": n,
        "seed": seed,
        "dtau": ed.direct.config["dtau"],
        "tau_end": tau_end,
        "per_sample": [{
            "coeffs": [float(c) for c in ed.decomposition.coeffs.real],
            "fitted_rate": remainder_report.fitted_rate,
            "bound": bound,
            "verdict": remainder_report.verdict,
        }],
        "remainder": remainder_report.to_dict(),
        "full_solution": full_report.to_dict(),
        "dominant_lambda": dominant,
        "recombination_error": recomb,
        "recombination_pass": recomb_pass,
        "gram_condition_number": ed.decomposition.gram_condition_number,
        "summary": {"pass": bool(passed)},
    }


def verify_semilinear_theorem(params: ProblemParams, k: int, n: int = 64,
                              seed: int = 0, tau_end: float = 6.0,
                              u0: Field | None = None,
                              record_dt: float = 0.05) -> dict:
    """Decomposition theorem for the perturbation evolution at index k."""
    basis = make_basis(n)
    rng = np.random.default_rng(seed)
    lam_top = semilinear_eigenvalues(params, 0)[0]
    if u0 is None:
        u0, eig_coeffs, eig_modes = random_mode_combination(params, basis, rng,
                                                            dominant_lambda=lam_top)
    else:
        eig_coeffs, eig_modes = modal_expansion(u0, params)
    ed = evolve_decomposed(u0, k, params, tau_end=tau_end, record_dt=record_dt)
    bound = 0.5 + params.pc0 - 2.0 * k
    remainder_report = fit_remainder_series(ed.taus, ed.remainder.norms["Nperp"],
                                            (tau_end / 2.0, tau_end), bound,
                                            floor_scale=ed.remainder.norms["Nperp"][0])
    dominant = _dominant_eigenvalue(eig_coeffs, eig_modes)
    full_report = fit_rate(ed.taus, ed.direct.norms["H2k"],
                           window=(max(0.0, tau_end - 2.0), tau_end),
                           bound=dominant, tol=0.05, check="match")
    recomb = float(np.max(ed.consistency_H))
    recomb_pass = recomb < 1e-5
    passed = (remainder_report.verdict == "pass"
              and full_report.verdict == "pass" and recomb_pass)
    return {
        "problem": "semilinear",
        "p": params.p,
        "pc0": params.pc0,
        "k": k,
        "n": n,
        "seed": seed,
        "dtau": ed.direct.config["dtau"],
        "tau_end": tau_end,
        "per_sample": [{
            "coeffs": [float(c) for c in ed.decomposition.coeffs.real],
            "fitted_rate": remainder_report.fitted_rate,
            "bound": bound,
            "verdict": remainder_report.verdict,
        }],
        "remainder": remainder_report.to_dict(),
        "full_solution": full_report.to_dict(),
        "dominant_lambda": dominant,
        "recombination_error": recomb,
        "recombination_pass": recomb_pass,
        "gram_condition_number": ed.decomposition.gram_condition_number,
        "summary": {"pass": bool(passed)},
    }


def stability_rate(params: ProblemParams) -> float:
    """Sharp decay exponent of gauge-free perturbations, -(p-3)/(p-1)."""
    return -(params.p - 3.0) / (params.p - 1.0)


def verify_linear_stability(params: ProblemParams, k: int = 2, samples: int = 20,
                            n: int = 64, seed: int = 0, tau_end: float = 6.0,
                            record_dt: float = 0.05, rate_tol: float = 0.05,
                            residual_limit: float = 0.1) -> dict:
    """Measured decay of gauge-free perturbations against the sharp rate.

    Every sample starts from a random analytic-mode combination whose
    gauge coefficient is zeroed after an exact modal expansion; removing
    only the orthogonal projection would leave a growing eigen-residue of
    the gauge mode behind. All fitted rates must sit within rate_tol of
    -(p-3)/(p-1) (two-sided: the estimate is sharp for generic data).
    Fits with RMS residual above residual_limit are marked inconclusive.
    """
    basis = make_basis(n)
    rng = np.random.default_rng(seed)
    target = stability_rate(params)
    lam_gauge = semilinear_eigenvalues(params, 0)[0]
    lam_keep = semilinear_eigenvalues(params, 1)[0]
    # theorem remainder bound does not reach the sharp rate unless k is
    # large; measured remainders of polynomial data decay at mode rates,
    # so smaller k still verifies sharpness (recorded in the report)
    bound_covers = (0.5 + params.pc0 - 2.0 * k) < target
    op = EvolutionOperator(basis, params, k=k, record_dt=record_dt)
    per_sample = []
    rates = []
    all_pass = True
    for s in range(samples):
        u0, coeffs, modes = random_mode_combination(
            params, basis, rng, dominant_lambda=lam_keep)
        exp_coeffs, exp_modes = modal_expansion(u0, params, modes=modes)
        gauge_idx = int(np.argmin([abs(complex(m.lam).real - lam_gauge)
                                   for m in exp_modes]))
        removed = exp_coeffs[gauge_idx]
        u_free = u0 - removed * exp_modes[gauge_idx].field
        u_free = u_free * (1.0 / h_norm(u_free))
        traj = op.run(u_free, tau_end, keep_states=False)
        report = fit_rate(traj.taus, traj.norms["H2k"],
                          window=(max(0.0, tau_end - 2.0), tau_end),
                          bound=target, tol=rate_tol, check="match")
        verdict = report.verdict
        if report.residual > residual_limit:
            verdict = "inconclusive"
        all_pass = all_pass and verdict == "pass"
        rates.append(report.fitted_rate)
        per_sample.append({
            "coeffs": [float(c) for c in np.asarray(exp_coeffs).real],
            "gauge_coefficient_removed": float(np.real(removed)),
            "fitted_rate": report.fitted_rate,
            "bound": target,
            "fit_residual": report.residual,
            "verdict": verdict,
        })
    rates = np.array(rates)
    sharp = bool(np.any(rates >= target - rate_tol)) if len(rates) else False
    summary = {
        "pass": bool(all_pass and sharp),
        "sharp": sharp,
        "rate_min": float(rates.min()) if len(rates) else None,
        "rate_max": float(rates.max()) if len(rates) else None,
        "target": target,
    }
    return {
        "problem": "semilinear",
        "p": params.p,
        "pc0": params.pc0,
        "k": k,
        "n": n,
        "dtau": op.dtau,
        "seed": seed,
        "tau_end": tau_end,
        "samples": samples,
        "theorem_bound_covers_rate": bool(bound_covers),
        "per_sample": per_sample,
        "summary": summary,
    }


def verify_gauge_mode_growth(params: ProblemParams, n: int = 128,
                             tau_end: float = 3.0, k: int = 1,
                             record_dt: float = 0.05) -> dict:
    """The gauge mode must grow at exactly its eigenvalue."""
    basis = make_basis(n)
    gauge = analytic_basis(params, max(k, 1), basis)[0]
    lam = complex(gauge.lam).real
    op = EvolutionOperator(basis, params, k=k, record_dt=record_dt)
    traj = op.run(gauge.field, tau_end, keep_states=False)
    report = fit_rate(traj.taus, traj.norms["H"], window=(0.0, tau_end),
                      bound=lam, tol=1e-3, check="match")
    return {
        "problem": "semilinear",
        "p": params.p,
        "k": k,
        "n": n,
        "dtau": op.dtau,
        "lambda": lam,
        "fit": report.to_dict(),
        "summary": {"pass": report.verdict == "pass"},
    }
