"""Build script: compiles the Cython kernel extension when possible.

The package works without the extension (a pure-numpy fallback is selected
at import time), so a missing compiler or Cython only costs speed.
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
                "csbc._kernels._cy_backend",
                ["src/csbc/_kernels/_cy_backend.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError as exc:  # pragma: no cover - build-environment dependent
    sys.stderr.write(
        f"warning: building without compiled kernels ({exc}); "
        "the pure-python backend will be used\n"
    )

setup(ext_modules=ext_modules)
