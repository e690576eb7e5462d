"""Exception types shared across the package.

Kept in one place so the HTTP service can map them onto status codes
without importing half the package.
"""


class EvacflowError(Exception):
    """Base class for all package errors."""


class InvalidLayoutError(EvacflowError):
    """Layout violates a structural invariant (no exits, overlapping rooms, ...)."""


class LayoutSchemaError(InvalidLayoutError):
    """Layout JSON does not conform to the documented schema."""


class AugmentationUnavailableError(EvacflowError):
    """Fewer than two reassignable rooms, so no variant can be produced."""


class OverCapacityError(EvacflowError):
    """A room was assigned more occupants than it has free cells."""


class UnreachableOccupantError(EvacflowError):
    """An occupant was seeded on a cell with no path to any exit."""


class GenerationError(EvacflowError):
    """Synthetic layout generation could not satisfy the request."""


class AlignmentError(EvacflowError):
    """Image alignment failed (no usable foreground contour)."""


class ConfigError(EvacflowError):
    """Invalid model or schedule configuration."""


class ContractError(EvacflowError):
    """Shape or range contract between components was violated."""


class StepError(EvacflowError):
    """Diffusion step index outside [1, T]."""


class TrainingDivergedError(EvacflowError):
    """Training loss became non-finite."""
