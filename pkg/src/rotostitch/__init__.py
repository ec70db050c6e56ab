"""Unrolled surface images of rotating cylindrical parts from video frames."""

__version__ = "0.1.0"
