"""Training small integer-valued and binarized networks with mixed-integer programming."""

__version__ = "0.1.0"
