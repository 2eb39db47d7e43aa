"""Python bindings for the gnnla core library."""

from ._gnnla import *  # noqa: F401,F403
from ._gnnla import Error, NumericalError, SparseMatrix

__all__ = [name for name in dir() if not name.startswith("_")]
