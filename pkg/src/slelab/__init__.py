"""slelab: a numerical laboratory for hypergeometric SLE and friends."""

__version__ = "0.1.0"
