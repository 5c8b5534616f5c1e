"""Build hook for the optional compiled kernels.

The package works without them: ``repflow.kernels`` falls back to a numpy
implementation when the extension is missing.
"""
from setuptools import Extension, setup

try:
    import numpy
    from Cython.Build import cythonize
except ImportError:  # pragma: no cover - build without Cython
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "repflow._ckernels",
                ["src/repflow/_ckernels.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "initializedcheck": False,
        },
    )

setup(ext_modules=ext_modules)
