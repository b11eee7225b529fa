"""Exception types shared across the package.

Contract violations (bad arguments, mismatched dims) raise plain ValueError;
the classes below mark domain failures a caller may reasonably catch.
"""


class EgoPriorError(Exception):
    """Base class for all domain errors raised by this package."""


class DatasetError(EgoPriorError):
    """Manifest, raster, or mask ingestion failed (missing file, bad format,
    malformed entry)."""


class EstimationError(EgoPriorError):
    """Homography estimation failed (degenerate points, too few inliers)."""


class TrainingError(EgoPriorError):
    """Model training had no eligible data."""


class EvaluationError(EgoPriorError):
    """Evaluation input was vacuous (no ground-truth positives, empty labels)."""


class ModelFormatError(EgoPriorError):
    """A model file is corrupt, truncated, or from an incompatible layout."""
