"""Rule-based digitizer for scientific line charts."""

from .errors import DigitizerError
from .pipeline import DigitizedGraph, PipelineConfig, digitize_figure, digitize_file

__all__ = ["DigitizerError", "DigitizedGraph", "PipelineConfig", "digitize_figure",
           "digitize_file"]
__version__ = "0.1.0"
