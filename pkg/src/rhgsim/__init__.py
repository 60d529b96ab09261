"""Monte-Carlo simulator and decoder for leakage-afflicted cluster-state memories."""

__version__ = "0.1.0"
