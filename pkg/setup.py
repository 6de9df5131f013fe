"""Build script: compiles the optional k-NN selection/vote extension.

The package is fully functional without the extension (a pure-numpy
fallback with identical semantics is selected at import time), so any
build failure here downgrades to a warning instead of aborting the
install.
"""

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
                "xfermetric._nnkernels",
                ["src/xfermetric/_nnkernels.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError as exc:  # pragma: no cover - build-env dependent
    print(f"warning: building without compiled k-NN kernels ({exc})", file=sys.stderr)

setup(ext_modules=ext_modules)
