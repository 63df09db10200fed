"""Skateboarding trick classification from synthetic 3-axis accelerometer signals."""

__version__ = "0.1.0"
