"""Builds the optional compiled kernel extension.

The extension is marked optional: if Cython or a C compiler is missing the
install still succeeds and ``infoshift.numkit.backend`` falls back to the
numpy implementations at import time.  Set INFOSHIFT_PURE_PY=1 to skip the
compile step entirely.
"""

import os

from setuptools import setup
from setuptools.extension import Extension

ext_modules = []
if os.environ.get("INFOSHIFT_PURE_PY") != "1":
    try:
        from Cython.Build import cythonize

        ext = Extension(
            "infoshift.numkit._ckern",
            ["src/infoshift/numkit/_ckern.pyx"],
            extra_compile_args=["-O3"],
            optional=True,
        )
        ext_modules = cythonize([ext], compiler_directives={"language_level": "3"})
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
