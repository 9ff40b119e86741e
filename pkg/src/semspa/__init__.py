"""Semantic-perspective attention and spatial-perspective sparse convolution networks for skeleton action recognition."""

__version__ = "0.1.0"
