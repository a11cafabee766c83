"""Automated contour and cell quantification for organoid fluorescence images."""

__version__ = "0.1.0"

from .imaging import ChannelImage, Fixed, OTSU, to_8bit, binarize, morph_open, label_components  # noqa: E402,F401
from .contours import analyze_contours, contour_stats, trace_boundaries  # noqa: E402,F401
