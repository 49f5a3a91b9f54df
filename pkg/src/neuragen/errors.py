"""Exception types raised across the pipeline."""


class NeuraGenError(Exception):
    """Base class for all pipeline errors."""


class DataError(NeuraGenError):
    """Input data could not be used (maps to CLI exit status 2)."""


# audio_io
class MalformedFile(DataError):
    pass


class UnsupportedFormat(DataError):
    pass


# features
class InvalidConfig(NeuraGenError):
    pass


class ClipTooShort(DataError):
    pass


class NoVoicedFrames(DataError):
    pass


# fusion
class EmptyFeatures(DataError):
    pass


class InsufficientData(DataError):
    pass


# dataset_store
class UnknownLabel(DataError):
    pass


class SchemaError(DataError):
    pass


class TooFewSamples(DataError):
    pass


# neural_net
class EmptySplit(DataError):
    pass


class DivergedLoss(NeuraGenError):
    pass


class ModelFormatError(DataError):
    pass


# metrics_eval
class EmptyEvaluation(DataError):
    pass
