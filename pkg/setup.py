"""Build script for the optional compiled kernel extension.

The package works without the extension (a pure-Python fallback is selected
at import time); building it just makes the pairwise metric loops fast.
"""

from setuptools import Extension, setup

try:
    import numpy
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "divq._kernels._ckernels",
                ["src/divq/_kernels/_ckernels.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
        },
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
