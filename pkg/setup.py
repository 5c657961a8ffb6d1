import numpy
from Cython.Build import cythonize
from setuptools import Extension, setup

# The compiled kernels are optional: if the build fails (no compiler), the
# package falls back to the pure-Python implementations at import time.
extensions = [
    Extension(
        "attnshift._kernels._core",
        sources=["src/attnshift/_kernels/_core.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        optional=True,
    )
]

setup(ext_modules=cythonize(extensions, compiler_directives={"language_level": 3}))
