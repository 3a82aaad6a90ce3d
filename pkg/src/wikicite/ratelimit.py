"""Token bucket rate limiter with an injectable clock for deterministic tests."""

from __future__ import annotations

import threading
import time


class TokenBucket:
    """Blocking token bucket shared between worker threads.

    With the default ``capacity=1.0`` the bucket degenerates into a strict
    pacer: grants are spaced at least ``1/rate`` seconds apart, so no sliding
    one-second window ever sees more than ``rate`` grants.  Larger capacities
    permit bursts (and can exceed the per-window rate transiently), which is
    why the default stays at 1.

    ``clock`` and ``sleep`` are injectable so tests can drive a simulated
    timeline instead of waiting on the wall clock.
    """

    def __init__(self, rate: float, capacity: float = 1.0,
                 clock=time.monotonic, sleep=time.sleep):
        if rate <= 0:
            raise ValueError("rate must be positive")
        self.rate = float(rate)
        self.capacity = float(capacity)
        self._clock = clock
        self._sleep = sleep
        self._tokens = self.capacity
        self._last = self._clock()
        self._lock = threading.Lock()

    def _refill(self, now: float) -> None:
        self._tokens = min(self.capacity, self._tokens + (now - self._last) * self.rate)
        self._last = now

    def acquire(self) -> float:
        """Block until one token is available; return the grant timestamp."""
        while True:
            with self._lock:
                now = self._clock()
                self._refill(now)
                if self._tokens >= 1.0:
                    self._tokens -= 1.0
                    return now
                wait = (1.0 - self._tokens) / self.rate
            self._sleep(wait)


class SimulatedClock:
    """Microsecond-resolution fake clock.

    Keeps time as an integer microsecond counter so window arithmetic in
    tests is exact; ``sleep`` rounds up, which only ever delays a grant and
    never lets one through early.
    """

    def __init__(self) -> None:
        self.now_us = 0

    def monotonic(self) -> float:
        return self.now_us / 1e6

    def sleep(self, seconds: float) -> None:
        if seconds > 0:
            self.now_us += max(1, int(-(-seconds * 1e6 // 1)))  # ceil

    def __call__(self) -> float:
        return self.monotonic()
