"""Backend selection for the hot kernels.

The compiled ``_core`` extension is used when it imports; otherwise the numpy
implementation in ``_core_py`` takes over. Set ``EVTRAJ_PURE_PYTHON=1`` to
force the fallback.
"""

import os

from . import _core_py

if os.environ.get("EVTRAJ_PURE_PYTHON", "") not in ("", "0"):
    _impl = _core_py
else:
    try:
        from . import _core as _impl
    except ImportError:  # extension not built
        _impl = _core_py

BACKEND = "compiled" if _impl is not _core_py else "python"

EPS = _core_py.EPS
REG_EQ4 = _core_py.REG_EQ4
REG_OMEGA = _core_py.REG_OMEGA

lgamma = _impl.lgamma
digamma = _impl.digamma
trigamma = _impl.trigamma
softplus = _core_py.softplus
winner_modes = _impl.winner_modes
head_loss = _impl.head_loss


def backends():
    """Return ``{name: module}`` for every importable backend."""
    found = {"python": _core_py}
    try:
        from . import _core
    except ImportError:
        pass
    else:
        found["compiled"] = _core
    return found
