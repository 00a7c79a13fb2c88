"""iterforge: human-steered iterative model development platform."""

__version__ = "0.1.0"
