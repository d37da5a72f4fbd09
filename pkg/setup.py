"""Build hook for the optional compiled kernels.

The package is pure Python plus one Cython extension holding the hot loops
(batched small-matrix orthonormalization and codebook distance scans).  If
Cython or a C compiler is unavailable the extension is skipped and the
package falls back to the numpy implementations at import time.
"""

from setuptools import setup

try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools.extension import Extension

    extensions = cythonize(
        [
            Extension(
                "grassfeed._kernels",
                ["src/grassfeed/_kernels.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                optional=True,
            )
        ],
        language_level=3,
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
