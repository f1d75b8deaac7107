"""Event kernel: ordering, tiebreak, run_until semantics, determinism."""

import pytest

from mcsim.kernel import Event, SchedulingError, Simulator


def test_schedule_and_dispatch_at_cycle():
    sim = Simulator()
    fired = []
    sim.at(3, lambda: sim.at(5, lambda: fired.append(sim.now)))
    sim.run_until(100)
    assert fired == [5]


def test_equal_cycle_dispatch_in_seq_order():
    sim = Simulator()
    order = []
    sim.at(7, lambda: order.append("first"))
    sim.at(7, lambda: order.append("second"))
    sim.run_until(10)
    assert order == ["first", "second"]


def test_scheduling_in_the_past_is_fatal():
    sim = Simulator()
    sim.at(3, lambda: None)
    sim.run_until(3)
    with pytest.raises(SchedulingError):
        sim.schedule(Event(2, 999, "t", "k", lambda: None))


def test_run_until_empty_queue_no_dispatches():
    sim = Simulator()
    assert sim.run_until(100) == 0
    assert sim.dispatched == 0


def test_run_until_single_event_stops_at_event_cycle():
    sim = Simulator()
    hits = []
    sim.at(50, lambda: hits.append(sim.now))
    assert sim.run_until(100) == 50
    assert hits == [50]


def test_run_until_leaves_future_events_and_now_at_limit():
    sim = Simulator()
    hits = []
    sim.at(50, lambda: hits.append(50))
    sim.at(150, lambda: hits.append(150))
    assert sim.run_until(100) == 100
    assert hits == [50]
    assert sim.run_until(200) == 150
    assert hits == [50, 150]


def test_dispatch_trace_identical_across_runs():
    def build():
        sim = Simulator(trace=True)

        def spawn(depth):
            if depth < 5:
                sim.at(sim.now + 2, lambda: spawn(depth + 1), target=f"a{depth}", kind="k")
                sim.at(sim.now + 2, lambda: None, target=f"b{depth}", kind="k")
        sim.at(0, lambda: spawn(0), target="root", kind="k")
        sim.run_until(1000)
        return sim.trace

    assert build() == build()


def test_no_event_loss_every_event_dispatched_once():
    sim = Simulator()
    seen = []
    for i in range(100):
        sim.at(i % 10, lambda i=i: seen.append(i))
    sim.run_until(10)
    assert sorted(seen) == list(range(100))
    assert len(seen) == 100


def test_stop_breaks_loop():
    sim = Simulator()
    hits = []
    sim.at(1, lambda: hits.append(1))
    sim.at(2, lambda: (hits.append(2), sim.stop()))
    sim.at(3, lambda: hits.append(3))
    sim.run_until(10)
    assert hits == [1, 2]
