"""Batch-size scaling toolkit: optimizers, closed-form bounds, sweeps, fits."""

try:
    from ._critbatch import *  # noqa: F401,F403  (installed package layout)
    from ._critbatch import __version__  # noqa: F401
except ImportError:  # build-tree layout: module next to the package on sys.path
    from _critbatch import *  # noqa: F401,F403
    from _critbatch import __version__  # noqa: F401
