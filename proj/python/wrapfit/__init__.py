"""Robust weighted-likelihood fitting of wrapped models on the p-torus."""

try:
    from ._wrapfit import *  # noqa: F401,F403
    from ._wrapfit import __doc__ as _core_doc  # noqa: F401
except ImportError:  # in-tree builds expose the extension at top level
    from _wrapfit import *  # noqa: F401,F403

__version__ = "0.1.0"
