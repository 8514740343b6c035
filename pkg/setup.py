"""Build script: compiles the hot rank-probability kernels as a C extension.

The extension is optional -- if no compiler is available the install still
succeeds and the package selects the pure-NumPy fallback at import time
(see covweight.kernels).
"""

import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension(
        "covweight._kernels",
        ["src/covweight/_kernels.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        optional=True,
    )
]

setup(
    ext_modules=cythonize(
        extensions, compiler_directives={"language_level": 3, "boundscheck": False}
    )
)
