"""Build script: compiles the optional Cython trial-walk kernel.

The package works without the extension (a pure-Python fallback is selected
at import time); building it just makes Monte Carlo trial loops much faster.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "worldlines._kernel._walk",
                ["src/worldlines/_kernel/_walk.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": 3, "embedsignature": True},
    )
except ImportError:  # no cython: install pure-python only
    extensions = []

setup(ext_modules=extensions)
