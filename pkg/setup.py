"""Build script for the optional compiled simulation core.

The package works without the extension (a pure-Python core with identical
arithmetic is selected at import time), so a failed compile downgrades to a
warning instead of aborting the install.
"""

import sys

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    """Build the extension if possible; fall back to pure Python otherwise."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler or toolchain missing
            self._warn(exc)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            self._warn(exc)

    @staticmethod
    def _warn(exc):
        print(
            f"warning: building the compiled simulation core failed ({exc}); "
            "installing with the pure-Python core only",
            file=sys.stderr,
        )


def extensions():
    try:
        from Cython.Build import cythonize
    except ImportError:
        print(
            "warning: Cython not available; installing with the pure-Python "
            "simulation core only",
            file=sys.stderr,
        )
        return []
    ext = Extension(
        "twoscale._simcore",
        ["src/twoscale/_simcore.pyx"],
        # -ffp-contract=off keeps the compiled core bit-identical to the
        # pure-Python core (no FMA contraction of a*b+c).
        extra_compile_args=["-O3", "-ffp-contract=off"],
    )
    return cythonize([ext], language_level=3)


setup(ext_modules=extensions(), cmdclass={"build_ext": optional_build_ext})
