"""Backend selection for the hot pairwise-scan kernels.

The compiled Cython extension is used when present; the numpy reference
implementation is the fallback.  ``ROUGHPDE_PURE=1`` forces the fallback,
which the parity tests and the benchmark use to compare both backends.
"""

import os

from . import reference

if os.environ.get("ROUGHPDE_PURE"):
    impl = reference
else:
    try:
        from . import _native as impl  # type: ignore[no-redef]
    except ImportError:
        impl = reference

path_holder_max = impl.path_holder_max
remainder_holder_max = impl.remainder_holder_max
second_holder_max = impl.second_holder_max
control_w_dp = impl.control_w_dp


def backend_name():
    return impl.BACKEND


def get_backend(name):
    """Return a specific backend module ("native" or "reference")."""
    if name == "reference":
        return reference
    if name == "native":
        from . import _native

        return _native
    raise ValueError(f"unknown backend {name!r}")
