"""Minimal deterministic discrete-event kernel.

Events fire in (time, insertion-sequence) order, so identical seeds give
bit-identical runs.  Agents are plain generators that yield either a
delay in milliseconds or a Future; the kernel resumes them with the
future's value.  All simulation times are in virtual milliseconds.
"""

from __future__ import annotations

import heapq
from typing import Any, Callable, Generator, Iterable


class Future:
    """Single-assignment result with resume callbacks."""

    __slots__ = ("done", "value", "_callbacks")

    def __init__(self):
        self.done = False
        self.value: Any = None
        self._callbacks: list[Callable[[Any], None]] = []

    def add_done_callback(self, fn: Callable[[Any], None]) -> None:
        if self.done:
            fn(self.value)
        else:
            self._callbacks.append(fn)

    def set_result(self, value: Any = None) -> None:
        assert not self.done, "future resolved twice"
        self.done = True
        self.value = value
        callbacks, self._callbacks = self._callbacks, []
        for fn in callbacks:
            fn(value)


class Scheduler:
    """Priority-queue event loop over virtual time."""

    def __init__(self):
        self.now = 0.0
        self._heap: list[tuple[float, int, Callable[[], None]]] = []
        self._seq = 0

    def call_at(self, when: float, fn: Callable[[], None]) -> None:
        assert when >= self.now, "cannot schedule into the past"
        self._seq += 1
        heapq.heappush(self._heap, (when, self._seq, fn))

    def call_later(self, delay: float, fn: Callable[[], None]) -> None:
        self.call_at(self.now + delay, fn)

    def run(self, until: float | None = None) -> None:
        """Drain the event queue, optionally stopping at a time horizon."""
        while self._heap:
            when, _, fn = self._heap[0]
            if until is not None and when > until:
                self.now = until
                return
            heapq.heappop(self._heap)
            self.now = when
            fn()

    def spawn(self, gen: Generator) -> "Process":
        return Process(self, gen)


class Process:
    """Drives a generator agent; yields are delays (ms) or Futures."""

    def __init__(self, sched: Scheduler, gen: Generator):
        self.sched = sched
        self.gen = gen
        self.finished = Future()
        sched.call_later(0.0, lambda: self._step(None))

    def _step(self, value: Any) -> None:
        try:
            yielded = self.gen.send(value)
        except StopIteration as stop:
            self.finished.set_result(stop.value)
            return
        if isinstance(yielded, Future):
            yielded.add_done_callback(self._step)
        else:
            self.sched.call_later(float(yielded), lambda: self._step(None))


def gather(sched: Scheduler, futures: Iterable[Future]) -> Future:
    """Future that resolves with a list of results once all inputs do."""
    futures = list(futures)
    out = Future()
    if not futures:
        sched.call_later(0.0, lambda: out.set_result([]))
        return out
    results: list[Any] = [None] * len(futures)
    remaining = [len(futures)]

    def make_cb(i: int):
        def cb(value: Any) -> None:
            results[i] = value
            remaining[0] -= 1
            if remaining[0] == 0:
                out.set_result(results)

        return cb

    for i, f in enumerate(futures):
        f.add_done_callback(make_cb(i))
    return out
