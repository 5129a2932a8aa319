"""Build the optional compiled kernels.

    pip install -e . --no-build-isolation

If Cython or a C compiler is missing the package still installs and the
pure-numpy kernels are used instead.
"""
import os

import numpy as np
from setuptools import Extension, setup

ext_modules = []
if os.environ.get("CAMLENS_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        extensions = [
            Extension(
                "camlens._ckernels",
                ["src/camlens/_ckernels.pyx"],
                include_dirs=[np.get_include()],
                # no FMA contraction: keeps results identical to the numpy path
                extra_compile_args=["-O3", "-ffp-contract=off"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ]
        ext_modules = cythonize(extensions, compiler_directives={"language_level": "3"})

setup(ext_modules=ext_modules)
