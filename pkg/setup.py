"""Build script: compiles the optional kernel extension.

The extension is a speedup only; if Cython or a C compiler is missing the
install still succeeds and the package falls back to the numpy kernels.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize

    ext = Extension(
        "invnet.backend._kernels",
        ["src/invnet/backend/_kernels.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    ext_modules = cythonize([ext], language_level=3)
except Exception as exc:  # pragma: no cover - build environment dependent
    print(f"invnet: skipping compiled kernels ({exc}); numpy fallback will be used")

setup(ext_modules=ext_modules)
