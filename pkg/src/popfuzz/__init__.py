"""popfuzz: a profit-guided exploit-search fuzzer over a deterministic DeFi world."""

from . import runtime as _runtime  # wires the transaction dispatcher on import

__all__ = []
__version__ = "0.1.0"

del _runtime
