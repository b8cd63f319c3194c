"""evbench: benchmark curation and evaluation for extreme-view 3D vision."""

__version__ = "0.1.0"
