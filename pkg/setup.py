"""Build the optional Cython kernels; the package falls back to numpy/scipy without them."""
import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("STEFANBAKE_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "stefanbake._ckernels",
                    ["src/stefanbake/_ckernels.pyx"],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={
                "language_level": "3",
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
            },
        )

setup(ext_modules=ext_modules)
