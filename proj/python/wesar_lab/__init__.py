"""Transformer training laboratory: gated weight reparameterization with
update-ratio telemetry, plus the verification probes behind it.

The heavy lifting lives in the compiled ``_wesar`` extension; this package
just re-exports it.  The extension sits inside the package in an installed
wheel, or on ``sys.path`` directly for in-tree builds.
"""

try:
    from ._wesar import *  # noqa: F401,F403  (wheel layout)
    from . import _wesar as _impl
except ImportError:
    from _wesar import *  # noqa: F401,F403  (in-tree build directory)
    import _wesar as _impl

__all__ = [name for name in dir(_impl) if not name.startswith("_")]
__doc__ = _impl.__doc__
