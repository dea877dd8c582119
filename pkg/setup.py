import os

from setuptools import Extension, setup


def extensions():
    if os.environ.get("WTMRD_NO_EXT"):
        return []
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError:
        return []
    ext = Extension(
        "wtmrd._kernels",
        ["src/wtmrd/_kernels.pyx"],
        include_dirs=[np.get_include()],
        # no fast-math or contraction: results must match the numpy fallback bit for bit
        extra_compile_args=["-O3", "-ffp-contract=off"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        optional=True,
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


setup(ext_modules=extensions())
