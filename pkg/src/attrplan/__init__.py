"""Attribute-space planning: detectors, exploration, goal-conditioned policies and graph search."""

__version__ = "0.1.0"
