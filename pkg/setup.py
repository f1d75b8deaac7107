"""Build hook for the optional compiled fast path.

The package is pure Python plus one Cython extension holding the per-beat
hot kernels (cache tag/LRU array, scratchpad bank arbitration).  If the
extension cannot be built the install still succeeds and the package falls
back to the pure-Python twin at import time.
"""

from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        "src/mcsim/kernels/_speed.pyx",
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
        },
    )
except Exception as exc:  # pragma: no cover - build environment dependent
    print(f"mcsim: skipping compiled kernels ({exc}); pure-Python fallback will be used")

setup(ext_modules=ext_modules)
