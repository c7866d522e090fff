"""Sliding-window rate limiting for live dispatches.

Clock and sleep are injectable so the window bound is testable with a
virtual clock; cache and script hits never pass through a limiter.
"""

from __future__ import annotations

import threading
import time
from collections import deque
from typing import Callable

WINDOW_SECONDS = 60.0


class RateLimiter:
    """Admit at most ``rpm`` dispatches in any sliding 60-second window."""

    def __init__(
        self,
        rpm: int,
        clock: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if rpm < 1:
            raise ValueError("rpm must be >= 1")
        self.rpm = rpm
        self._clock = clock
        self._sleep = sleep
        self._lock = threading.Lock()
        self._stamps: deque[float] = deque()

    def acquire(self) -> float:
        """Block until a slot frees; returns the admission timestamp."""
        while True:
            with self._lock:
                now = self._clock()
                while self._stamps and self._stamps[0] <= now - WINDOW_SECONDS:
                    self._stamps.popleft()
                if len(self._stamps) < self.rpm:
                    self._stamps.append(now)
                    return now
                wait = self._stamps[0] + WINDOW_SECONDS - now
            self._sleep(max(wait, 0.0))
