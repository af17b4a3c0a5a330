"""Exception types raised by tsnkit."""


class TsnError(Exception):
    """Base class for all tsnkit errors."""


class InvalidParameterError(TsnError, ValueError):
    """Parameters or arguments violate their stated domain."""


class DegenerateWindowError(TsnError):
    """The truncation window holds less probability mass than the floor."""


class DataOutsideWindowError(TsnError, ValueError):
    """An observation falls outside the truncation window."""


class QuadratureError(TsnError):
    """Adaptive quadrature exhausted its subdivision budget."""


class NumericalDegeneracyError(TsnError):
    """A computed quantity lost all precision (e.g. a non-positive variance)."""


class EstimationFailedError(TsnError):
    """No estimate could be produced from the data."""
