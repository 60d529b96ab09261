"""Build shim for the C++ blossom-matching extension (everything else is in pyproject.toml)."""
from pybind11.setup_helpers import Pybind11Extension, build_ext
from setuptools import setup

setup(
    ext_modules=[
        Pybind11Extension(
            "rhgsim._wmatch",
            ["src/rhgsim/_wmatch.cpp"],
            cxx_std=17,
            extra_compile_args=["-O2"],
        ),
    ],
    cmdclass={"build_ext": build_ext},
)
