"""Exception hierarchy. Every error raised by the package derives from
:class:`EmbeddedError` so callers (and the CLI) can catch them in one place."""


class EmbeddedError(Exception):
    """Base class for all construction and verification errors."""

    code = "error"


class EdgeEnergyError(EmbeddedError, ValueError):
    code = "EdgeEnergy"


class DuplicateEnergyError(EmbeddedError, ValueError):
    code = "DuplicateEnergy"


class OutOfHorizonError(EmbeddedError, IndexError):
    code = "OutOfHorizon"


class StepTooLargeError(EmbeddedError, ValueError):
    code = "StepTooLarge"


class NoBlockFoundError(EmbeddedError):
    code = "NoBlockFound"


class ResonantBlockDegenerateError(EmbeddedError, ValueError):
    code = "ResonantBlockDegenerate"


class ResonantHypothesisError(EmbeddedError, ValueError):
    code = "ResonantHypothesisViolated"


class HorizonTooShortError(EmbeddedError, ValueError):
    code = "HorizonTooShort"


class ParameterError(EmbeddedError, ValueError):
    code = "InvalidParameters"


class InsufficientSpanError(EmbeddedError, ValueError):
    code = "InsufficientSpan"


class DecimatedTraceError(EmbeddedError, ValueError):
    code = "DecimatedTrace"


class EnvelopeNeverFitsError(EmbeddedError):
    code = "EnvelopeNeverFits"


class FileFormatError(EmbeddedError, ValueError):
    code = "FileFormat"
