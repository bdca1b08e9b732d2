"""Build the optional compiled pair-interaction kernel.

The extension is a performance accelerator only: if no C compiler (or Cython)
is available the install still succeeds and the package falls back to the pure
NumPy implementation of the same kernel at import time.
"""

import os
import sys

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    """build_ext that degrades to a warning instead of failing the install."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # CompileError, missing toolchain, ...
            self._warn(exc)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            self._warn(exc)

    @staticmethod
    def _warn(exc):
        sys.stderr.write(
            "warning: compiled kernel unavailable (%s); "
            "falling back to the pure NumPy backend\n" % (exc,)
        )


def make_extensions():
    import numpy

    use_openmp = os.environ.get("LANDAUSIM_NO_OPENMP", "") == ""
    compile_args = ["-O3"]
    link_args = []
    if use_openmp:
        compile_args.append("-fopenmp")
        link_args.append("-fopenmp")
    ext = Extension(
        "landausim._pairkern",
        sources=["src/landausim/_pairkern.pyx"],
        include_dirs=[numpy.get_include()],
        extra_compile_args=compile_args,
        extra_link_args=link_args,
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    try:
        from Cython.Build import cythonize
    except ImportError:
        sys.stderr.write("warning: Cython not installed; skipping compiled kernel\n")
        return []
    return cythonize([ext], compiler_directives={"language_level": "3"})


setup(
    ext_modules=make_extensions(),
    cmdclass={"build_ext": OptionalBuildExt},
)
