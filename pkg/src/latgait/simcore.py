"""Selects the stepping kernel at import time.

The compiled extension is preferred when it imported cleanly; setting
LATGAIT_PURE_PY=1 in the environment forces the pure-Python twin.  Both
expose the same run_steps contract and produce bit-identical output.
"""

import os

if os.environ.get("LATGAIT_PURE_PY"):
    from . import _stepcore_py as _impl
else:
    try:
        from . import _stepcore as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _stepcore_py as _impl

KERNEL_NAME: str = _impl.KERNEL_NAME
run_steps = _impl.run_steps


def kernel_variants():
    """All importable kernels as {name: run_steps}; used by the equivalence
    tests and the benchmark."""
    from . import _stepcore_py

    variants = {_stepcore_py.KERNEL_NAME: _stepcore_py.run_steps}
    try:
        from . import _stepcore  # type: ignore[attr-defined]

        variants[_stepcore.KERNEL_NAME] = _stepcore.run_steps
    except ImportError:
        pass
    return variants
