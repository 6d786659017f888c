import os

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

ext_modules = []
if cythonize is not None and not os.environ.get("CIRCFILTER_NO_EXTENSION"):
    np_random_lib = os.path.join(np.get_include(), "..", "..", "random", "lib")
    ext_modules = cythonize(
        [
            Extension(
                "circfilter._kernels",
                ["src/circfilter/_kernels.pyx"],
                include_dirs=[np.get_include()],
                library_dirs=[np_random_lib],
                libraries=["npyrandom", "m"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
