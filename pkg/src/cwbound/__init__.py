"""Verification and optimization toolkit for laser-method bounds on the
matrix multiplication exponent built from Coppersmith-Winograd tensors."""

__version__ = "0.1.0"

from .errors import CwboundError  # noqa: F401
