import os

import numpy as np
from setuptools import Extension, setup

ext_modules = []
if os.environ.get("KOLMO_LAB_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "kolmo_lab._kernels",
                    ["src/kolmo_lab/_kernels.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        # no Cython: the numpy fallback is used at runtime
        ext_modules = []

setup(ext_modules=ext_modules)
