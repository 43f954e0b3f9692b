"""Build the optional compiled Hessian kernel; the package works without it."""
from setuptools import setup

try:
    from Cython.Build import cythonize
    from setuptools.extension import Extension

    ext_modules = cythonize(
        [Extension("secrecy_region.kernel._hesscore",
                   ["src/secrecy_region/kernel/_hesscore.pyx"],
                   extra_compile_args=["-O3"])],
        language_level=3,
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
