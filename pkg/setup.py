"""Build script: compiles the optional evaluation kernel.

The package works without the extension (a numpy lane is selected at import),
so any build failure here degrades to a pure-Python install.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "hybrid_mte.kernels._evalcore",
                ["src/hybrid_mte/kernels/_evalcore.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
