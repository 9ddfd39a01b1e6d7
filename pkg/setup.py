"""Build script: compiles the optional simplex hot-kernel extension.

The package works without the extension (a numpy fallback is selected at
import time), so a failed compile only costs speed. Set EBSOPT_NO_EXT=1 to
skip compilation entirely.
"""

import os

from setuptools import setup

ext_modules = []
if not os.environ.get("EBSOPT_NO_EXT"):
    try:
        import numpy
        from Cython.Build import cythonize

        ext_modules = cythonize(
            "src/ebsopt/solver/_kernels.pyx",
            compiler_directives={"language_level": "3"},
        )
        for ext in ext_modules:
            ext.include_dirs.append(numpy.get_include())
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
