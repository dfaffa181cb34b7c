import os

import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

PYX = os.path.join("src", "dyport", "_kernels", "_betweenness_cy.pyx")
C = os.path.join("src", "dyport", "_kernels", "_betweenness_cy.c")


def make_extension(source: str) -> Extension:
    return Extension(
        "dyport._kernels._betweenness_cy",
        [source],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )


if cythonize is not None:
    ext_modules = cythonize(
        [make_extension(PYX)], compiler_directives={"language_level": "3"}
    )
elif os.path.exists(C):
    # Build from the shipped translation when Cython is absent.
    ext_modules = [make_extension(C)]
else:
    # No compiled kernel; the package selects the pure-Python one at import.
    ext_modules = []

setup(ext_modules=ext_modules)
