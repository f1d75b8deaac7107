"""Hot-kernel selection: compiled extension if available, else pure Python.

The simulator's per-beat work (cache tag/LRU probes, scratchpad bank
arbitration) is isolated behind two small classes so it can run either as
a Cython extension or as the pure-Python twin.  Set MCSIM_PURE_PYTHON=1 to
force the fallback; ``benchmarks/bench_kernels.py`` compares the two.
"""

import os

BACKEND = "pure"

if os.environ.get("MCSIM_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from mcsim.kernels._speed import CacheCore, SpmEngine  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        from mcsim.kernels.pure import CacheCore, SpmEngine
else:
    from mcsim.kernels.pure import CacheCore, SpmEngine

__all__ = ["CacheCore", "SpmEngine", "BACKEND"]
