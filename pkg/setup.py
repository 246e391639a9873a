"""Build script: compiles the likelihood kernel extension.

The package works without the extension (a NumPy fallback is selected at
import time), so a failed compile only costs speed. Set HIGARROTE_NO_EXT=1
to skip building it entirely.
"""
import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("HIGARROTE_NO_EXT"):
    import numpy as np
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "higarrote._gpkern",
                ["src/higarrote/_gpkern.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level="3",
    )

setup(ext_modules=ext_modules)
