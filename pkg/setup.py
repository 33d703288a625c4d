import os

import numpy as np
from setuptools import Extension, setup


def extensions():
    if os.environ.get("RESCOCYCLE_NO_EXT"):
        return []
    try:
        from Cython.Build import cythonize
    except ImportError:
        return []
    ext = Extension("rescocycle._ckernels", ["src/rescocycle/_ckernels.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"])
    return cythonize([ext], compiler_directives={"language_level": "3"})


setup(ext_modules=extensions())
