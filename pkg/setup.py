import numpy as np
from setuptools import setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        "src/qrsample/_kernels/_scatter_cy.pyx",
        compiler_directives={"language_level": 3},
    )
except ImportError:
    # Pure-python fallback is selected at import time; the package still works.
    ext_modules = []

setup(ext_modules=ext_modules, include_dirs=[np.get_include()])
