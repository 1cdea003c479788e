"""Build script for the optional compiled statevector kernels.

The package is fully functional without the extension (a numpy fallback is
selected at import time); building it just makes gate application faster.
Compile in place with:

    python3 setup.py build_ext --inplace
"""
import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

extensions = [
    Extension(
        "uqsim._kernels",
        ["src/uqsim/_kernels.pyx"],
        include_dirs=[numpy.get_include()],
        extra_compile_args=["-O3"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        optional=True,
    )
]

setup(
    ext_modules=cythonize(extensions, language_level="3") if cythonize else [],
)
