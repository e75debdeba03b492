import numpy
from setuptools import Extension, setup
from Cython.Build import cythonize

# The compiled kernels are an optional speedup: if the build fails (no
# compiler), the package falls back to the numpy implementations at import.
setup(
    ext_modules=cythonize(
        [
            Extension(
                "bgnn._ckern",
                ["src/bgnn/_ckern.pyx"],
                extra_compile_args=["-O3"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                optional=True,
            )
        ],
        language_level=3,
    )
)
