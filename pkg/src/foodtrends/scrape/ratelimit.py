"""Request rate limiting for provider calls.

The contract is a hard sliding-window bound: never more than the configured
number of acquisitions inside any window, not just on average. A timestamp
log enforces that exactly; a continuously refilling bucket would allow a
burst plus refill to exceed the bound inside a single window.
"""

from __future__ import annotations

import math
import threading
import time
from collections import deque

from ..errors import ValidationError


class RateLimiter:
    """Blocks acquire() so at most floor(rate) calls land in any 1 s window.

    For rates below one per second the window stretches to 1/rate with a
    single slot. Safe for concurrent acquirers. clock/sleep are injectable
    for tests.
    """

    def __init__(self, rate_per_sec: float, clock=time.monotonic, sleep=time.sleep):
        if not rate_per_sec > 0:
            raise ValidationError(f"rate_per_sec must be > 0, got {rate_per_sec}")
        if rate_per_sec >= 1.0:
            self._capacity = int(math.floor(rate_per_sec))
            self._window = 1.0
        else:
            self._capacity = 1
            self._window = 1.0 / rate_per_sec
        self._clock = clock
        self._sleep = sleep
        self._stamps: deque[float] = deque()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        """Wait until a slot is free in the current window, then take it."""
        while True:
            with self._lock:
                now = self._clock()
                horizon = now - self._window
                while self._stamps and self._stamps[0] <= horizon:
                    self._stamps.popleft()
                if len(self._stamps) < self._capacity:
                    self._stamps.append(now)
                    return
                wait = self._stamps[0] + self._window - now
            self._sleep(max(wait, 1e-4))
