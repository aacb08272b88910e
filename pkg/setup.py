import os

from setuptools import setup

# The compiled kernel is optional: the package falls back to the pure-Python
# implementation in vodsim._core.pycore when the extension is absent.
# Set VODSIM_NO_EXT=1 to skip compilation entirely.
ext_modules = []
if not os.environ.get("VODSIM_NO_EXT"):
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            ["src/vodsim/_core/_ckernel.pyx"],
            language_level=3,
        )
    except ImportError:
        pass

setup(ext_modules=ext_modules)
