"""Build script for the optional Cython kernels.

The package works without the extension; ``tonerec.kernels`` falls back to
numpy implementations when ``tonerec._ckernels`` cannot be imported.
"""
import os
import sys

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # pragma: no cover - toolchain dependent
            print(f"warning: Cython kernels not built ({exc}); using numpy fallback",
                  file=sys.stderr)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # pragma: no cover
            print(f"warning: failed to build {ext.name} ({exc})", file=sys.stderr)


def compile_args():
    args = ["-O3"]
    # TONEREC_PORTABLE=1 skips host-specific vector instructions
    if os.environ.get("TONEREC_PORTABLE") != "1":
        args.append("-march=native")
    return args


def extensions():
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError:
        return []
    exts = [
        Extension(
            "tonerec._ckernels",
            ["src/tonerec/_ckernels.pyx"],
            include_dirs=[np.get_include()],
            extra_compile_args=compile_args(),
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        )
    ]
    return cythonize(exts, compiler_directives={"language_level": "3"}, quiet=True)


setup(ext_modules=extensions(), cmdclass={"build_ext": OptionalBuildExt})
