"""
Phase timing on the monotonic clock
"""

import time


class PhaseClock:
    """
    Lap timer for the phases of one step

    Usage:
        clock = PhaseClock()
        ...collide...
        collide_us = clock.lap()
    """

    def __init__(self):
        self._last = time.perf_counter_ns()

    def lap(self) -> float:
        """Microseconds since construction or the previous lap"""
        now = time.perf_counter_ns()
        elapsed = (now - self._last) / 1000.0
        self._last = now
        return elapsed
