"""Speed-gradient entropy dynamics of probability densities.

Densities on a compact interval evolve toward the maximum-entropy state
under mass (and optionally energy) conservation; the MaxEnt solvers give the
limits independently so convergence can be checked.
"""

from .density import (
    DensityField,
    ScalarField,
    centered_bilinear,
    differential_entropy,
    project_mass,
    scalar_product,
)
from .diagnostics import (
    TrajectoryRecord,
    alignment_angle,
    gh_moment,
    lyapunov_value,
    vdot_mass_energy,
    vdot_mass_only,
)
from .dynamics import (
    EnergyDensity,
    Mode,
    SgParams,
    apply_psi,
    lagrange_multipliers,
    rhs_mass_energy,
    rhs_mass_only,
)
from .errors import EntropyFlowError
from .grid import Grid, build_uniform_grid, integrate
from .integrator import Trajectory, run, step
from .maxent import GibbsSolution, MomentConstraint, gibbs_solve, jaynes_maxent, uniform_limit

__version__ = "0.1.0"
