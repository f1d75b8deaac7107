#!/usr/bin/env python3
"""Compare the compiled and pure-Python hot kernels.

Two synthetic storms: a cache probe/fill mix over a 256-set 8-way array,
and a two-port scratchpad drain with heavily colliding bank walks.  Both
backends run the identical trace; the table reports wall time and speedup.

    python3 benchmarks/bench_kernels.py [--accesses N] [--beats N]
"""

import argparse
import random
import time

from mcsim.kernels import pure

try:
    from mcsim.kernels import _speed
except ImportError:
    _speed = None


def bench_cache(core_cls, accesses, seed=7):
    rng = random.Random(seed)
    core = core_cls(256, 8)
    trace = [(rng.randrange(256), rng.randrange(4096), rng.randrange(2))
             for _ in range(accesses)]
    t0 = time.perf_counter()
    hits = 0
    for s, tag, dirty in trace:
        w = core.lookup(s, tag)
        if w < 0:
            w = core.victim_way(s)
            core.fill(s, w, tag, dirty)
        else:
            hits += 1
            core.touch(s, w)
    dt = time.perf_counter() - t0
    return dt, hits, core.state_digest()


def bench_spm(engine_cls, beats, seed=11):
    rng = random.Random(seed)
    eng = engine_cls(16, 2)
    per_burst = 64
    bursts = beats // per_burst
    t0 = time.perf_counter()
    handle = 0
    queued = []
    for _ in range(bursts):
        port = rng.randrange(2)
        ch = rng.randrange(2)
        banks = [rng.randrange(4) for _ in range(per_burst)]  # heavy collisions
        queued.append((port, ch, banks))
    done = 0
    pending = list(queued)
    while pending or eng.busy():
        while pending:
            port, ch, banks = pending[0]
            try:
                eng.enqueue(port, ch, handle, banks, arrival=eng.synced)
            except RuntimeError:
                break  # slot occupied; drain first
            handle += 1
            pending.pop(0)
        done += len(eng.advance(eng.synced + 1_000_000))
    dt = time.perf_counter() - t0
    return dt, done, eng.state_digest()


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--accesses", type=int, default=300_000)
    ap.add_argument("--beats", type=int, default=300_000)
    args = ap.parse_args()

    rows = []
    pc, hits_p, dig_p = bench_cache(pure.CacheCore, args.accesses)
    row = {"kernel": "cache probe/fill", "pure_s": pc}
    if _speed is not None:
        cc, hits_c, dig_c = bench_cache(_speed.CacheCore, args.accesses)
        assert (hits_p, dig_p) == (hits_c, dig_c), "backends diverged"
        row.update(compiled_s=cc, speedup=pc / cc)
    rows.append(row)

    ps, done_p, sdig_p = bench_spm(pure.SpmEngine, args.beats)
    row = {"kernel": "scratchpad drain", "pure_s": ps}
    if _speed is not None:
        cs, done_c, sdig_c = bench_spm(_speed.SpmEngine, args.beats)
        assert (done_p, sdig_p) == (done_c, sdig_c), "backends diverged"
        row.update(compiled_s=cs, speedup=ps / cs)
    rows.append(row)

    print(f"{'kernel':<20} {'pure [s]':>10} {'compiled [s]':>14} {'speedup':>9}")
    for r in rows:
        comp = f"{r['compiled_s']:.3f}" if "compiled_s" in r else "n/a"
        spd = f"{r['speedup']:.1f}x" if "speedup" in r else "-"
        print(f"{r['kernel']:<20} {r['pure_s']:>10.3f} {comp:>14} {spd:>9}")
    if _speed is None:
        print("compiled kernels not built; install with the Cython extension to compare")


if __name__ == "__main__":
    main()
