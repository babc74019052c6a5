"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid parameters for a constructor or experiment."""


class LayoutError(ValueError):
    """Malformed or empty maze layout."""


class ShapeError(ValueError):
    """Array dimensions do not agree."""


class SymmetryError(ValueError):
    """Matrix handed to the symmetric eigensolver is not symmetric."""


class SamplingError(ValueError):
    """No state is available to draw training pairs from."""


class InvalidStateError(ValueError):
    """State id refers to a wall or otherwise unusable cell."""


class ClusteringError(ValueError):
    """Cluster score is undefined for the given labels."""


class RenderError(ValueError):
    """Field cannot be rendered."""


class InvariantError(RuntimeError):
    """A post-condition checked during an experiment run failed."""
