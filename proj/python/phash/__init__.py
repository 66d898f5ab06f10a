"""Deep priority hashing: priority losses, encoder training, Hamming retrieval."""

try:
    from ._phash import *  # noqa: F401,F403  (installed package layout)
    from . import _phash as _core
except ImportError:  # in-tree builds put the extension on sys.path directly
    from _phash import *  # noqa: F401,F403
    import _phash as _core

__all__ = [name for name in dir(_core) if not name.startswith("_")]
__version__ = "0.1.0"
