"""Exception hierarchy shared across the package."""


class EmistripError(Exception):
    """Base class for all package-specific errors."""


class DimensionError(EmistripError, ValueError):
    """Image or frame dimensions violate a contract (odd, degenerate, mismatched)."""


class ParameterError(EmistripError, ValueError):
    """A parameter is outside its documented range."""


class IngestionError(EmistripError, ValueError):
    """An annotation or detection file could not be ingested; names the offending record."""


class ManifestError(EmistripError, ValueError):
    """A dataset directory does not satisfy the pairing convention."""


class PairingError(EmistripError, ValueError):
    """Two images that must form a pair do not match."""


class EvaluationError(EmistripError, ValueError):
    """An evaluation run cannot proceed (e.g. detection coverage gaps)."""
