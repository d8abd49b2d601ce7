"""Exception types shared across the simulator."""


class TrustCloudSimError(Exception):
    """Base class for all library errors."""


class DomainError(TrustCloudSimError, ValueError):
    """An argument is outside its valid range."""


class InsufficientDataError(TrustCloudSimError):
    """Too few cloud drops to estimate numerical characteristics."""


class InsufficientEvidenceError(TrustCloudSimError):
    """Classification requested before an individual trust cloud exists."""


class ZeroEntropyError(TrustCloudSimError):
    """Membership degree is undefined for a zero-entropy standard cloud."""


class NoEvidenceError(TrustCloudSimError):
    """Trust attributes requested from an empty evidence window."""


class NoNeighborError(TrustCloudSimError):
    """A training round could not find a router/destination pair."""


class ConfigError(TrustCloudSimError, ValueError):
    """A scenario configuration value or file is invalid."""

    def __init__(self, message, field=None):
        if field is not None:
            message = f"{field}: {message}"
        super().__init__(message)
        self.field = field


class UndefinedMetricError(TrustCloudSimError):
    """A metric has an empty denominator for this run."""
