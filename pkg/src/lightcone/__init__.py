"""Pseudospectral evolution and eigenmode analysis of radial waves in
similarity coordinates on the backward lightcone."""

from .spectral import (BasisMismatchError, ChebBasis, GridFn, antiderivative,
                       barycentric_eval, differentiate, l2_inner, make_basis)
from .operators import (Field, H2kField, ProblemParams, ResolventResidualError,
                        apply_D2k, apply_L, apply_L0, apply_Lprime, energy_form,
                        generator_matrix, h_inner, h_norm, resolvent_at_one)
from .modes import (ModePair, ModeResidualError, NonTerminatingError,
                    ScalarProfile, continuum_eigenfunction,
                    eigenvalue_scan, free_eigenvalue, free_profile,
                    free_profile_polynomial, frobenius_polynomial,
                    semilinear_eigenvalues)
from .decompose import (Decomposition, GramConditionError, analytic_basis,
                        check_membership, h2k_inner, h2k_norm, modal_expansion,
                        nperp_norm, project)
from .evolve import (EvolutionOperator, TimeStepUnstableError, Trajectory,
                     dalembert_oracle, evolve, evolve_decomposed)
from .analysis import (DecayReport, fit_rate, verify_free_theorem,
                       verify_linear_stability, verify_semilinear_theorem)

__version__ = "0.1.0"
