import numpy
from setuptools import Extension, setup

# The compiled core is optional: if Cython or a C compiler is missing the
# package still installs and falls back to the numpy implementation.
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "fkgreen._core",
                ["src/fkgreen/_core.pyx"],
                extra_compile_args=["-O3"],
                include_dirs=[numpy.get_include()],
            )
        ],
        compiler_directives={"language_level": 3},
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
