"""Exception hierarchy. ``exit_code`` is what the CLI returns for each family."""


class EpochSpecError(Exception):
    """Base of every error the CLI reports with an exit code"""

    exit_code = 1


# Input errors (exit 2)

class InputError(EpochSpecError):
    exit_code = 2


class InvalidSeries(InputError, ValueError):
    """Series content is empty, non-numeric, non-finite or not UTF-8"""


class SeriesReadError(InputError, OSError):
    """Series file cannot be opened or read"""


class PlanReadError(InputError, OSError):
    """Experiment plan file cannot be opened or read"""


# Configuration errors (exit 3)

class ConfigError(EpochSpecError, ValueError):
    exit_code = 3


class InvalidLength(ConfigError):
    pass


class BlockTooLong(ConfigError):
    """Block length leaves fewer than two epochs"""


class FrequencyOutOfRange(ConfigError):
    """Frequency index outside 1 <= j < length/2"""


class RegimeError(ConfigError):
    """Formula used outside the memory range it is defined on"""


class InvalidMemoryParameter(ConfigError):
    """d outside (-1/2, 3/2)"""


class InvalidDgpSpec(ConfigError):
    pass


class PlanError(ConfigError):
    """Plan is valid JSON but not a valid plan"""


# Numerical failures (exit 4)

class NumericalError(EpochSpecError, ArithmeticError):
    exit_code = 4


class QuadratureNonConvergence(NumericalError):
    """Adaptive quadrature missed its tolerance"""


class NotPositiveDefinite(NumericalError):
    """A Sigma block or the normalizer D fails its symmetry or positivity check"""


class EigenFailure(NumericalError):
    pass


class InversionFailure(NumericalError):
    """Characteristic-function inversion did not converge"""


class DegenerateDenominator(NumericalError):
    """Epoch-average periodogram vanishes; ``frequency`` is the first j affected"""

    def __init__(self, message: str, frequency: int):
        super().__init__(message)
        self.frequency = frequency


class EmbeddingFailure(NumericalError):
    """Circulant embedding produced negative eigenvalues"""
