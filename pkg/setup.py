import numpy
from setuptools import Extension, setup

# The compiled core is optional: the package falls back to a NumPy
# implementation at import time if the extension is absent.
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "dynbc._core",
                ["src/dynbc/_core.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
