"""Exception hierarchy shared by all mesoflow modules."""


class MesoflowError(Exception):
    """Base class for every error raised by mesoflow."""


class IntegrationError(MesoflowError):
    """A vector-field evaluation produced a non-finite value."""

    def __init__(self, message, location=None):
        super().__init__(message)
        self.location = location


class DomainError(MesoflowError, ValueError):
    """A field was sampled outside the region where it is defined."""


class NodeError(MesoflowError):
    """The mode amplitude fell below the node floor, so Q is undefined."""


class UnsupportedDegreeError(MesoflowError, ValueError):
    pass


class VerticalTangent(MesoflowError, ZeroDivisionError):
    """Slope requested where S_x vanishes."""


class DegenerateDensityError(MesoflowError, ValueError):
    """Timed trace seeded where the meso-density is zero."""


class ConfigError(MesoflowError, ValueError):
    """Invalid configuration; carries every violation found, not just the first."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("invalid configuration:\n  - " + "\n  - ".join(self.problems))
