"""Build script: compiles the departure-recursion kernel as a C extension.

The package works without the extension (a pure-Python twin of the kernel is
selected at import time), so failures here only cost speed.  The build skips
the extension entirely when Cython or the .pyx source is unavailable.
"""

import os

from setuptools import Extension, setup

PYX = os.path.join("src", "junctionsim", "_kernel.pyx")

ext_modules = []
if os.path.exists(PYX):
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        extensions = [
            Extension(
                "junctionsim._kernel_c",
                sources=[PYX],
                # Forbid FMA contraction so the compiled kernel produces
                # bit-identical floats to the pure-Python twin.
                extra_compile_args=["-O2", "-ffp-contract=off"],
            )
        ]
        ext_modules = cythonize(
            extensions,
            language_level=3,
            compiler_directives={
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
            },
        )

setup(ext_modules=ext_modules)
