import os

import numpy as np
from setuptools import Extension, setup

# DSMCPAR_NO_EXT=1 installs the pure-Python fallback only.
ext_modules = []
if not os.environ.get("DSMCPAR_NO_EXT"):
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "dsmcpar._ckernels",
                    ["src/dsmcpar/_ckernels.pyx"],
                    include_dirs=[np.get_include()],
                    # no FMA contraction: keeps per-element arithmetic identical across partitions
                    extra_compile_args=["-O3", "-ffp-contract=off", "-fno-fast-math"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={
                "language_level": "3",
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
                "initializedcheck": False,
            },
        )

setup(ext_modules=ext_modules)
