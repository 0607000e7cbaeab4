"""makinolab: pseudo-spectral laboratory for expanding barotropic gas flows.

Simulates the symmetrized compressible gas equations with optional
Poisson/Helmholtz potential couplings as a perturbation around an exactly
evaluated multi-dimensional Burgers flow, and verifies Sobolev decay rates,
mass conservation, the bootstrap ODE bound and commutator/composition
inequalities at desk scale.
"""

from .burgers import (BumpPerturbation, BurgersEval, BurgersRef, check_H0,
                      dist_spectrum_negreals, eval_burgers, invert_flow,
                      k_decay_series)
from .coupling import (ClampHealth, PhysParams, density_power, makino_inverse,
                       makino_transform, potential_gradient)
from .diagnostics import (DecayExponents, FitResult, NormSeries, OdeParams,
                          bisect_ode_threshold, decay_exponents, decay_fit,
                          fit_power_law, ineq_ratio, ineq_ratio_sweep, mass,
                          ode_lemma_run)
from .errors import (AdmissibilityError, CflViolationError, ConfigError,
                     DimensionError, DomainError, EigenSolveError,
                     FieldNotFiniteError, H0ViolatedError,
                     InsufficientWindowError, MakinolabError,
                     NegativeDensityError, NewtonDivergedError,
                     NonZeroMeanError, StiffnessError)
from .evolve import (AdmissibilityVerdict, MakinoState, RunConfig, Trajectory,
                     admissibility_check, bb_rhs, build_initial_state,
                     horizon_guard, integrate, rk4_step)
from .spectral import (Grid, NormSpec, ScalarField, VectorField, dealias,
                       divergence, frac_lambda, friedrichs_project, hs_norm,
                       pair_norm, set_fft_workers, sobolev_norm, spectral_grad)

__version__ = "0.1.0"
