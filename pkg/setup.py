from setuptools import Extension, setup
from Cython.Build import cythonize

exts = [
    Extension(
        "surround_cod._native",
        ["src/surround_cod/_native.pyx"],
        extra_compile_args=["-O3"],
    )
]

setup(ext_modules=cythonize(exts, language_level=3))
