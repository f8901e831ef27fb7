"""Discrete-event kernel: a priority queue ordered by (time, post sequence)."""

import heapq
import itertools

from .errors import TimeTravel


class Kernel:
    """Single-threaded event kernel.

    Every dispatch appends ``(time, component, text)`` to ``log``; ``text``
    is the label given at post time unless the action returns a string.
    """

    def __init__(self):
        self.now = 0
        self.log = []
        self.dispatched = 0
        self._queue = []
        self._seq = itertools.count()

    def __len__(self):
        return len(self._queue)

    def post(self, time, action, component="kernel", label="event"):
        if time < self.now:
            raise TimeTravel(f"{component}: cannot post at {time} ps, kernel time is {self.now} ps")
        seq = next(self._seq)
        heapq.heappush(self._queue, (time, seq, component, label, action))
        return seq

    def peek(self):
        return self._queue[0][0] if self._queue else None

    def step(self):
        time, _, component, label, action = heapq.heappop(self._queue)
        self.now = time
        self.dispatched += 1
        # append before running so nested errors still show the failing event
        entry = [time, component, label]
        self.log.append(entry)
        text = action()
        if isinstance(text, str):
            entry[2] = text

    def run_through(self, limit):
        """Dispatch every event with time <= ``limit``."""
        while self._queue and self._queue[0][0] <= limit:
            self.step()

    def run_before(self, limit):
        """Dispatch every event with time < ``limit``."""
        while self._queue and self._queue[0][0] < limit:
            self.step()

    def advance(self, time):
        if time < self.now:
            raise TimeTravel(f"cannot move kernel back from {self.now} to {time}")
        self.now = time
