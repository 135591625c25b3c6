"""Build script for the optional compiled kernel.

The package works without the extension (a pure-numpy fallback is selected at
import time), so the build is best-effort: if Cython or a C compiler is
missing the wheel is still produced, just slower.
"""

from setuptools import setup, Extension

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext = Extension(
        "wptnoma._core",
        sources=["src/wptnoma/_core.pyx"],
        include_dirs=[numpy.get_include()],
        extra_compile_args=["-O3"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    ext_modules = cythonize([ext], compiler_directives={"language_level": "3"})
except Exception as exc:  # pragma: no cover - build environment dependent
    print("skipping compiled kernel build: %s" % exc)

setup(ext_modules=ext_modules)
