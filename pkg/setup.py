"""Build script: compiles the cell-grid edge kernel when Cython is available.

The package works without the extension (a numpy fallback is selected at
import time), so a failed build is demoted to a warning rather than an error.
"""
import warnings

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "cgrg._grid",
                ["src/cgrg/_grid.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except ImportError as exc:  # pragma: no cover - build environment dependent
    warnings.warn(f"Cython unavailable ({exc}); installing pure-Python cgrg")

setup(ext_modules=ext_modules)
