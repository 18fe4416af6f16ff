"""Federated anomaly-detection simulator: python surface over the C++ core."""

try:
    from ._fedad import *  # noqa: F401,F403  (installed wheel layout)
    from . import _fedad as _impl
except ImportError:  # in-tree build: the extension sits on sys.path
    from _fedad import *  # noqa: F401,F403
    import _fedad as _impl

__version__ = "0.1.0"
__all__ = [name for name in dir(_impl) if not name.startswith("_")]
