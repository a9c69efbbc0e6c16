"""Build script: compiles the optional Cython propagation kernel.

The package is fully functional without the extension (a pure-numpy
backend is selected at import time); the build therefore tolerates a
missing Cython or a failing compile.
"""

from setuptools import setup

import os

ext_modules = []
include_dirs = []
_PYX = "src/gyrocal/kernels/_fast.pyx"
if os.path.exists(_PYX):
    try:
        import numpy
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [_PYX],
            compiler_directives={
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
                "language_level": "3",
            },
        )
        include_dirs = [numpy.get_include()]
    except ImportError:
        pass

setup(
    ext_modules=ext_modules,
    include_dirs=include_dirs,
)
