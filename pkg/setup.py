import sys

from setuptools import setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "poltomo._kernels",
                ["src/poltomo/_kernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3", "-fcx-limited-range"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError as exc:  # numpy fallback is used at runtime
    print(f"building without compiled kernels: {exc}", file=sys.stderr)

setup(ext_modules=ext_modules)
