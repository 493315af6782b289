"""Build script. The compiled kernel module is optional: if Cython or a C
compiler is unavailable the package falls back to the pure-Python kernels."""

import sys

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "occtree._kernels_cy",
                ["src/occtree/_kernels_cy.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except Exception as exc:  # pragma: no cover
    print(f"occtree: building without compiled kernels ({exc})", file=sys.stderr)

setup(ext_modules=ext_modules)
