"""DSTG grounding - decoupled spatial/temporal graphs for referring expressions in video."""

__version__ = "0.1.0"
