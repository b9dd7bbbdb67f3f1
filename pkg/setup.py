"""Build script for the optional compiled kernel.

The package works without the extension (a numpy fallback is selected at
import), so a failed compile downgrades to a warning instead of aborting the
install. Set ``SIMFILTER_NATIVE=1`` to tune for the build machine's ISA and
``SIMFILTER_NO_EXT=1`` to skip the extension entirely.
"""

import os
import sys

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # noqa: BLE001
            print(f"warning: compiled kernel not built ({exc}); "
                  "the numpy fallback will be used", file=sys.stderr)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # noqa: BLE001
            print(f"warning: failed to build {ext.name} ({exc}); "
                  "the numpy fallback will be used", file=sys.stderr)


def extensions():
    if os.environ.get("SIMFILTER_NO_EXT") == "1":
        return []
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError:
        return []
    # -ffp-contract=off keeps a*b+s as two rounded operations, which the
    # numpy fallback reproduces bit for bit.
    args = ["-O3", "-ffp-contract=off", "-fno-fast-math", "-fopenmp"]
    if os.environ.get("SIMFILTER_NATIVE") == "1":
        args.append("-march=native")
    ext = Extension(
        "simfilter._ckernel",
        ["src/simfilter/_ckernel.pyx"],
        include_dirs=[numpy.get_include(), "src/simfilter"],
        extra_compile_args=args,
        extra_link_args=["-fopenmp"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


setup(ext_modules=extensions(), cmdclass={"build_ext": OptionalBuildExt})
