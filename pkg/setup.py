"""Build script for the optional compiled rasterizer kernel.

The package works without the extension: splatcache._kernels falls back to a
pure-numpy implementation that produces bit-identical output.  Building the
extension only makes rendering faster.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "splatcache._kernels._splat_cy",
                ["src/splatcache/_kernels/_splat_cy.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                optional=True,
            )
        ],
        language_level=3,
    )
except ImportError:
    # No Cython at build time: install the pure-python package as-is.
    ext_modules = []

setup(ext_modules=ext_modules)
