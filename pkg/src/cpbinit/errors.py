"""Exception hierarchy shared across the package."""


class CpbError(Exception):
    """Base class for all package errors."""


class NoFrames(CpbError):
    pass


class DimensionMismatch(CpbError):
    pass


class DecodeError(CpbError):
    def __init__(self, name, reason=""):
        self.name = name
        msg = f"cannot decode {name}"
        if reason:
            msg += f": {reason}"
        super().__init__(msg)


class WriteError(CpbError):
    pass


class GeometryError(CpbError):
    pass


class InsufficientTraining(CpbError):
    pass


class ParamError(CpbError, ValueError):
    pass


class BoundsError(CpbError, IndexError):
    pass


class ModeError(CpbError):
    pass


class SpecError(CpbError, ValueError):
    pass
