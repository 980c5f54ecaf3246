"""Continuous data assimilation by nudging for hydrodynamic systems: joint
recovery of states and unknown forces from sparse observations, and moment
recovery for the 1D radiative transfer equation."""

from .core import (ENDPOINT_INCLUSIVE, PERIODIC_CELLS, Dirichlet, Field, Grid1D, Grid2D, Neumann,
                   Periodic, SnapshotBuffer, make_grid2d, make_uniform_grid, norm, push_snapshot,
                   zeros_field)
from .errors import NudgeDAError
from .harness import (ExperimentConfig, RunReport, emit_plot_data, preset, run_convergence,
                      run_experiment)
from .interpolant import KernelInterpolant, apply, apply_derivative, build, extend_ghost, restrict
from .models import (SystemSpec, euler1d_system, euler2d_system, moment_system,
                     rte_moment_matrices, scalar_system)
from .moments import (MomentSet, RecoveryConfig, cascade_recover, extract_gradient,
                      integrate_moment, recover_low_moments, run_rte_recovery)
from .nudge import NudgeConfig, NudgeState, init_nudge, nudge_step, run_nudge
from .numerics import (antiderivative_corrected, bdf_time_derivative, gauss_legendre,
                       ssprk3_step, weno5_derivative, weno5_flux_derivative)
from .reference import (ObservationSeries, Observer, Trajectory, observe, solve_reference,
                        solve_rte_kinetic)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
