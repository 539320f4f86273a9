class SimstudyError(Exception):
    """Base class for errors raised by simstudy."""


class ComponentError(SimstudyError, ValueError):
    """A component was constructed or used incorrectly."""


class StateVersionError(SimstudyError):
    """A persisted RNG state was produced by a different generator or format version."""


class NotComputedError(SimstudyError, FileNotFoundError):
    """A referenced object has not been produced yet.

    ``stage`` names the pipeline stage that would create it.
    """

    def __init__(self, message: str, stage: str):
        super().__init__(message)
        self.stage = stage


class ChecksumError(SimstudyError):
    """A payload file failed checksum validation."""


class CollisionError(SimstudyError):
    """A name or file already exists with different content."""


class StageOrderError(SimstudyError):
    """A pipeline stage was called before the stage it depends on."""


class StageFailure(SimstudyError):
    """A user component raised while the engine was running it."""
