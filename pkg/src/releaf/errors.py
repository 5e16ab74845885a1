class ConfigurationError(ValueError):
    """Parameters that cannot describe a valid run."""


class ProtocolError(RuntimeError):
    """The caller broke the step / ingest contract (e.g. a missing reward)."""
