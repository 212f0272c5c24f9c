"""Exception taxonomy shared across the package.

The CLI maps these onto stable exit codes (see ``relish.cli``): config
problems exit 2, data problems exit 3, numeric/training problems exit 4.
"""


class RelishError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(RelishError):
    """Invalid or inconsistent configuration (unknown keys, bad values)."""


class ShapeError(RelishError):
    """Operands with incompatible dimensions."""


class EmptySupportError(RelishError):
    """A masked reduction was asked to operate over zero unmasked entries."""


class GraphError(RelishError):
    """Malformed computation graph (non-scalar loss, unrecorded op, cycle)."""


class NonFiniteError(GraphError):
    """A public operation produced NaN or Inf."""


class EvaluationError(RelishError):
    """A checked numeric evaluation (e.g. a gradient-check forward) failed."""


class DataError(RelishError):
    """Problems with datasets, manifests, or targets."""


class ManifestError(DataError):
    """Malformed or inconsistent manifest file."""


class HsfFormatError(DataError):
    """Malformed hidden-state file (bad magic, version, or size)."""


class ParseError(RelishError):
    """A string could not be parsed into a finite numeric value."""


class MatchingError(RelishError):
    """No admissible hidden size exists for the requested parameter budget."""


class MetricError(RelishError):
    """Base class for metric computation failures."""


class DegenerateSeriesError(MetricError):
    """A correlation was requested on a constant series."""


class RangeError(MetricError):
    """A zero or invalid value range where a positive range is required."""


class CoverageError(MetricError):
    """Seeds do not cover identical (dataset, backbone) pairs."""


class TrainingError(RelishError):
    """Training diverged or could not proceed."""
