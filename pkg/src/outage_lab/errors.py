class OutageLabError(ValueError):
    """Base class for invalid inputs."""


class UnsupportedConstellation(OutageLabError):
    pass


class CsitNoiseError(OutageLabError):
    """CSIT noise variance exceeds the channel variance."""


class BudgetExceeded(OutageLabError):
    """An exhaustive enumeration would exceed its size budget."""


class SpecError(OutageLabError):
    """An experiment spec failed validation."""
