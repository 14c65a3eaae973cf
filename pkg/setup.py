"""Build the optional compiled kernels; installs pure-Python if compilation fails."""
import os

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # noqa: BLE001
            print(f"warning: compiled kernels not built ({exc}); using pure-Python fallback")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # noqa: BLE001
            print(f"warning: {ext.name} not built ({exc}); using pure-Python fallback")


def extensions():
    if os.environ.get("CARCHASE_NO_EXT"):
        return []
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError:
        return []
    # contraction or fast-math would break bit-parity with the Python kernels
    flags = ["-O2", "-ffp-contract=off", "-fno-fast-math", "-fno-builtin"]
    exts = [
        Extension("carchase._ckernels", ["src/carchase/_ckernels.pyx"],
                  include_dirs=[np.get_include()], extra_compile_args=flags),
        Extension("carchase._csearch", ["src/carchase/_csearch.pyx"], language="c++",
                  include_dirs=[np.get_include(), "src/carchase"], extra_compile_args=flags + ["-std=c++17"]),
    ]
    return cythonize(exts, compiler_directives={"language_level": "3"})


setup(ext_modules=extensions(), cmdclass={"build_ext": OptionalBuildExt})
