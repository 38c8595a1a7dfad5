"""Hidden variable recurrent fractal interpolation: curves, surfaces, error bounds and dimensions."""

__version__ = "0.1.0"

from .errors import HvrfifError, NoConvergence, ValidationError  # noqa: E402,F401
