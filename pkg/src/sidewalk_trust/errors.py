"""Exception types shared across the package."""


class SidewalkTrustError(Exception):
    """Base class for all errors raised by sidewalk_trust."""


class InputError(SidewalkTrustError):
    """Unusable input data: unreadable files, invalid boundaries, broken XML."""


class HistoryParseError(InputError):
    """Fatal XML error while streaming a history file."""

    def __init__(self, message: str, byte_offset: int, line: int | None = None):
        self.byte_offset = byte_offset
        self.line = line
        where = f"byte {byte_offset}" + (f", line {line}" if line is not None else "")
        super().__init__(f"{message} ({where})")


class ConfigError(SidewalkTrustError, ValueError):
    """Invalid run or model configuration."""


class EvaluationTimeError(SidewalkTrustError, ValueError):
    """Trust evaluation requested before a feature's last edit."""
