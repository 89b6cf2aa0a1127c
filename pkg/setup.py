from setuptools import Extension, setup

# The compiled kernel backend is optional: if Cython (or a C toolchain) is
# unavailable the package falls back to the pure numpy backend at import time.
USE_CYTHON = True
try:
    from Cython.Build import cythonize
except ImportError:
    USE_CYTHON = False

extensions = []
if USE_CYTHON:
    extensions = cythonize(
        [
            Extension(
                "robustids._kernels._speed",
                ["src/robustids/_kernels/_speed.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=extensions)
