from setuptools import Extension, setup

# The compiled kernel is optional: without Cython (or a C compiler) the
# package still installs and scsp.backend falls back to the numpy kernels.
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "scsp._kernels",
                ["src/scsp/_kernels.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
