"""Transaction-level simulator of a mixed-criticality SoC memory system.

Models the shared AXI-style interconnect of an embedded SoC together with
the hardware blocks that make it time-predictable: per-initiator traffic
shapers (burst splitter, write buffer, beat-budget regulator), a
set-partitionable last-level cache in front of a deterministic HyperRAM
backend, a bank-aliased L2 scratchpad, and a 12-core lockstep-capable
compute cluster with hardware fast recovery.  Everything runs on a single
deterministic discrete-event kernel, so a (scenario, seed) pair always
reproduces the same trace and the same report.
"""

__version__ = "0.1.0"
