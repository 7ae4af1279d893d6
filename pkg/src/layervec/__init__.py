"""Layer-wise raster-to-SVG vectorization with closed cubic Bezier paths."""
__version__ = "0.1.0"

from .estimator import LayerwiseVectorizer
from .geometry import ClosedBezierPath, flatten, make_circle_path
from .optim import OptConfig, run
from .render import render
from .svgio import from_svg, interpolate, to_svg

__all__ = [
    "ClosedBezierPath",
    "LayerwiseVectorizer",
    "OptConfig",
    "flatten",
    "from_svg",
    "interpolate",
    "make_circle_path",
    "render",
    "run",
    "to_svg",
]
