from src.core.constants import EXIT_CONFIG, EXIT_INGESTION, EXIT_NUMERICAL


class NormBenchError(Exception):
    """Base class for every error raised by the library"""

    exit_code = 1


class UsageError(NormBenchError, ValueError):
    """An API was called in a way its contract does not allow"""


class RejectedInputError(NormBenchError, ValueError):
    """An operator received an input it cannot process"""


class ConfigError(NormBenchError):
    """Invalid training or normalization configuration"""

    exit_code = EXIT_CONFIG


class UnsupportedKindError(ConfigError):
    """The normalization kind has no support for the requested operation"""


class IngestionError(NormBenchError):
    """A dataset file could not be read"""

    exit_code = EXIT_INGESTION

    def __init__(self, path, reason):
        self.path = str(path)
        self.reason = reason
        super().__init__(f"{self.path}: {reason}")


class NumericalFailure(NormBenchError):
    """Training produced a non-finite value"""

    exit_code = EXIT_NUMERICAL

    def __init__(self, epoch, batch, value):
        self.epoch = epoch
        self.batch = batch
        self.value = value
        super().__init__(
            f"non-finite loss {value!r} at epoch {epoch}, batch {batch}"
        )


class OracleFailure(NormBenchError):
    """The finite-difference oracle evaluated a non-finite function value"""

    def __init__(self, coordinate, value):
        self.coordinate = coordinate
        self.value = value
        super().__init__(f"non-finite value {value!r} at coordinate {coordinate}")
