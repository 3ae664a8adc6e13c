"""Exception types raised across the package."""


class ModelValidityError(ValueError):
    """An empirical model was evaluated outside its validity range."""


class UnsupportedMaterialError(ValueError):
    """The material has no permittivity model (foliage is attenuation-only)."""


class SceneGenerationError(RuntimeError):
    """Building placement failed after the bounded number of retries."""

    def __init__(self, message, seed=None):
        super().__init__(message if seed is None else f"{message} (seed={seed})")
        self.seed = seed


class GeometryError(ValueError):
    """Degenerate tx/rx geometry for the image method."""

    def __init__(self, message, surface=None):
        super().__init__(message)
        self.surface = surface


class InvalidTapsError(ValueError):
    """LFSR feedback taps do not produce a maximal-length sequence."""


class EstimationError(RuntimeError):
    """The CFO estimator found no dominant spectral peak."""


class ConfigError(ValueError):
    """Malformed or invalid campaign configuration."""

    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class CampaignError(RuntimeError):
    """Too many trajectory points failed for the campaign to be usable."""
