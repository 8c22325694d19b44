"""Exception hierarchy for the toolkit.

Input errors (bad files, missing paths, malformed headers) are kept separate
from validity errors (model used outside its physical or numerical range) so
the CLI can map them to distinct exit codes.
"""


class SoilRadarError(Exception):
    """Base class for all toolkit errors."""


class InputError(SoilRadarError):
    """Bad user input: missing files, malformed configuration, bad arguments."""


class FileFormatError(InputError):
    """A data file failed to parse; message names the offending line."""

    def __init__(self, path, line_no, message):
        self.path = str(path)
        self.line_no = line_no
        super().__init__(f"{path}:{line_no}: {message}")


class ValidityError(SoilRadarError):
    """A model or algorithm was invoked outside its validity range."""


class ApproximationRangeError(ValidityError):
    """Electrical size exceeds the documented validity of a scattering approximation."""


class GatingError(ValidityError):
    """Ground-return isolation failed (no usable envelope peak in the search interval)."""


class BandError(ValidityError):
    """Requested frequencies fall outside the calibrated or configured band."""


class NoSolutionError(ValidityError):
    """An inverse mapping has no solution in its bracketing interval."""


class RowDetectionError(ValidityError):
    """No periodic row structure found in a canopy height model."""


class PointCloudError(ValidityError):
    """Point cloud too sparse or degenerate for the requested operation."""
