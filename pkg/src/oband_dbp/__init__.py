"""Single-step digital backpropagation for O-band coherent links."""

__version__ = "0.1.0"
