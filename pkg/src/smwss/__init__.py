"""Surface-modified Wannier-Stark states of atoms in a vertical optical lattice near a mirror.

The package chains a Casimir-Polder calculation for a layered mirror, a
Lennard-Jones/Casimir-Polder surface potential, a graded-mesh eigensolver
and Raman spectroscopy tools.  Lengths enter the solver in lattice units
(``lambda_l / 2``) and energies in recoil energies; everything else is SI.
"""

from .atom import AtomModel, TransitionLine, load_atom, polarizability_a03, polarizability_imag
from .casimir import (
    C3Fit,
    CPConfig,
    PotentialTable,
    cp_k_integral,
    cp_potential,
    extract_C3,
    load_or_tabulate,
    matsubara_frequencies,
    tabulate,
)
from .eigen import (
    EigenState,
    Mesh,
    SolverSettings,
    SpectrumResult,
    build_mesh,
    classify,
    mean_distance,
    solve,
    uniform_mesh,
)
from .errors import (
    AccuracyError,
    ConfigError,
    DomainError,
    ExtrapolationError,
    MatchingError,
    ResourceError,
    SmwssError,
    TrackingWarning,
    UnitError,
)
from .optics import (
    Layer,
    LayerStack,
    MaterialModel,
    Oscillator,
    PerfectMirror,
    bragg_stack,
    epsilon_imag,
    fresnel_imag,
    load_material,
    load_stack,
    stack_reflection,
)
from .potential import (
    LennardJonesParams,
    SurfacePotential,
    TotalPotential,
    assemble,
    find_matching_distance,
    gravity_potential,
    lj_depth_from_z0,
    lj_potential,
    optical_potential,
    total_potential,
)
from .spectrum import (
    RamanConfig,
    SpectrumLine,
    infer_c3_uncertainty,
    raman_amplitude,
    raman_matrix,
    scan_c3,
    scan_z0,
    stick_spectrum,
)
from .units import CONSTANTS, DEFAULT_UNITS, LatticeUnits, PhysicalConstants, bloch_frequency, convert, recoil_energy

__version__ = "0.1.0"
