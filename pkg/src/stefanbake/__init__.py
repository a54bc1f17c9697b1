"""Front-tracking solver for a two-phase Stefan problem with moisture-weighted front speed."""
from .errors import (
    ConfigurationError,
    DomainError,
    MalformedArtifactError,
    MalformedInputError,
    MoistureFloorViolated,
    SchemaVersionError,
    StepFailure,
)
from .front import CouplingConfig, SimState, TerminationReport, coupled_step, run, stefan_velocity
from .kernels import BACKEND
from .landau import FieldOnGrid, LandauGrid
from .problem import (
    InitialData,
    OvenSchedule,
    PhysicalParams,
    ProblemSetup,
    SorptionFunction,
    validate_setup,
)

__version__ = "0.1.0"
