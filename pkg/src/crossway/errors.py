"""Exception types shared across the package."""


class CrosswayError(Exception):
    """Base class for all crossway errors."""


class GeometryInconsistent(CrosswayError):
    """Intersection dimensions violate a structural constraint."""


class EntryAreaTooShort(CrosswayError):
    """Entry area cannot absorb a comfortable stop from the speed limit."""


class OffPath(CrosswayError):
    """Point lies farther from a trajectory centerline than the on-path tolerance."""


class OutOfRange(CrosswayError):
    """Arc-length argument outside the trajectory domain."""


class ZeroDeceleration(CrosswayError):
    """Braking distance undefined for zero deceleration."""


class DuplicateId(CrosswayError):
    """Vehicle id already registered."""


class NotInS3(CrosswayError):
    """Grant applied to a vehicle that is not awaiting right of way."""


class MissingNeighbor(CrosswayError):
    """Control mode references a leader/partner that was not supplied."""


class NoConflictPoint(CrosswayError):
    """Virtual mapping requested for a trajectory pair without a conflict."""


class NonpositivePeriod(CrosswayError):
    """Discretization period must be positive."""


class NonpositiveSpeed(CrosswayError):
    """Safety-gate travel times undefined at nonpositive speed."""


class SolverFailure(CrosswayError):
    """QP solver exceeded its iteration budget."""


class ConfigInvalid(CrosswayError):
    """Scenario configuration failed validation.

    Carries the dotted path of the offending field.
    """

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class CollisionDetected(CrosswayError):
    """Two vehicle footprints overlap; the run is aborted."""


class IoFailure(CrosswayError):
    """Artifact could not be read or written."""


class UnknownKind(CrosswayError):
    """Unrecognized plot-data kind."""
