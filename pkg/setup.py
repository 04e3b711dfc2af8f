"""Build the optional compiled kernels.

If Cython or a C compiler is missing the package still installs and runs
on the pure-Python kernels.
"""

import sys

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # noqa: BLE001
            print(f"warning: compiled kernels not built ({exc}); using pure Python", file=sys.stderr)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # noqa: BLE001
            print(f"warning: could not build {ext.name} ({exc}); using pure Python", file=sys.stderr)


try:
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "asyncbcd._ckernels",
                ["src/asyncbcd/_ckernels.pyx"],
                # no FMA contraction: keeps results bit-identical to the Python kernels
                extra_compile_args=["-O2", "-ffp-contract=off", "-fno-fast-math"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules, cmdclass={"build_ext": OptionalBuildExt})
