"""Variational weak solutions of the 1D pressureless Euler-Poisson system.

The solver evaluates the quadratic Lax-Oleinik-type representation of the
weak solution for attractive, repulsive and neutral forcing, handles
measure-valued initial data (delta-shock formation and, for repulsive
forcing, splitting), and ships three independent verification oracles:
smooth characteristics, sticky particles and brute-force minimization.
"""

from .measure_data import (
    DataFormatError,
    DiracAtom,
    MeasureData1D,
    ParticleSystem,
    PiecewiseDensity,
    VelocityProfile,
    discretize,
    initial_field,
    load_initial_data,
    normalize,
    parse_initial_data,
)
from .variational import (
    ExclusionSet,
    MinimizerResult,
    PrefixTables,
    SliceAtom,
    SolutionSlice,
    build_tables,
    evaluate_entropy_slice,
    evaluate_slice,
    lower_envelope,
    minimize,
    shock_speed,
)
from .fields import BumpTestFunction, FieldSlice, differentiate, weak_residual
from .characteristics import (
    CharacteristicFan,
    center_of_mass,
    critical_times,
    evolve_smooth,
)
from .sticky import (
    MergeEvent,
    StickyParticle,
    StickyState,
    collision_time,
    step_to_next_event,
)
from . import sticky
from .radial import RadialData, RadialSlice, ReducedMeasure, reduce_radial, solve_radial
from .validator import ConvergenceReport, Resolution, convergence_study

__version__ = "0.1.0"
