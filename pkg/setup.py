"""Build script for the optional compiled stepping kernel.

The package works without the extension (a pure-Python twin of the kernel is
bundled); building it just makes long rollouts much faster.  Floating-point
contraction and the sin/cos -> sincos builtin fusion are disabled so the
compiled kernel and the Python twin produce bit-identical trajectories
(glibc's fused sincos can differ from separate sin and cos calls by one ulp
on rare arguments).
"""

from setuptools import setup
from setuptools.extension import Extension

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

if cythonize is not None:
    extensions = cythonize(
        [
            Extension(
                "latgait._stepcore",
                ["src/latgait/_stepcore.pyx"],
                extra_compile_args=[
                    "-O3",
                    "-ffp-contract=off",
                    "-fno-builtin-sin",
                    "-fno-builtin-cos",
                ],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
else:
    extensions = []

setup(ext_modules=extensions)
