"""Patch-based robust sparse coding for bright-spot detection."""

try:
    from ._spotlier import *  # noqa: F401,F403  (installed layout)
    from ._spotlier import __version__  # noqa: F401
except ImportError:  # in-tree builds put the extension on PYTHONPATH
    from _spotlier import *  # noqa: F401,F403
    from _spotlier import __version__  # noqa: F401
