"""Build script for the optional compiled kernels.

The extension links MPFR/GMP. When Cython, a compiler or the libraries are
missing the build is skipped and ``connprob.kernels`` uses the pure-Python
fallback.
"""
import os
import sys

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # pragma: no cover - depends on toolchain
            print(f"warning: compiled kernels not built ({exc}); using fallback", file=sys.stderr)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # pragma: no cover
            print(f"warning: failed to build {ext.name} ({exc}); using fallback", file=sys.stderr)


def extensions():
    if os.environ.get("CONNPROB_NO_EXT"):
        return []
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError:
        return []
    ext = Extension(
        "connprob._kernels",
        ["src/connprob/_kernels.pyx"],
        include_dirs=[np.get_include()],
        libraries=["mpfr", "gmp"],
        extra_compile_args=["-O3"],
    )
    return cythonize([ext], language_level=3, quiet=True)


setup(ext_modules=extensions(), cmdclass={"build_ext": OptionalBuildExt})
