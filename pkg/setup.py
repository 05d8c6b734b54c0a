"""Build script for the optional compiled kernels.

The package works without the extension (a pure-numpy fallback is selected
at import time), so a failed extension build degrades to a pure install
instead of aborting.
"""

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "fracode._kernels",
                ["src/fracode/_kernels.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
