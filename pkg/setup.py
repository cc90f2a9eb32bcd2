import os

import numpy
from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("EMGVB_NO_BINARY"):
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "emgvb._kernels._recursions",
                    ["src/emgvb/_kernels/_recursions.pyx"],
                    include_dirs=[numpy.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            language_level=3,
        )

setup(ext_modules=ext_modules)
