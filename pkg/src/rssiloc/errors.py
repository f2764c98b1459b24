"""Exception types shared across the package."""


class RssiLocError(Exception):
    """Base class for all errors raised by rssiloc."""


class DomainError(RssiLocError, ValueError):
    """An argument lies outside the domain of the operation (e.g. d <= 0)."""


class DegenerateFitError(RssiLocError, ValueError):
    """Calibration data cannot determine both path-loss parameters."""


class SingularInnovationError(RssiLocError, ArithmeticError):
    """Innovation covariance H P H^T + R is zero."""


class UnknownBeaconError(RssiLocError, KeyError):
    """An observation references a beacon id missing from the beacon map."""


class StreamClosed(RssiLocError):
    """The stream-end sentinel (RSSI == 0) was received; the pipeline is frozen."""


class FormatError(RssiLocError, ValueError):
    """Malformed input file.

    ``location`` is a row number for CSV inputs or a dotted path for JSON.
    """

    def __init__(self, message: str, location: str | int | None = None, column: str | None = None):
        self.location = location
        self.column = column
        where = []
        if location is not None:
            where.append(f"row {location}" if isinstance(location, int) else str(location))
        if column is not None:
            where.append(f"column {column!r}")
        prefix = ", ".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)
