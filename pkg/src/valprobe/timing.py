"""Clocks and the token-bucket pacer shared by the scanner and the UDP server."""

from __future__ import annotations

import threading
import time


class SimClock:
    """Virtual time in microseconds.  ``sleep`` advances instead of blocking."""

    def __init__(self, start_s: float = 0.0):
        self._now_us = int(start_s * 1_000_000)
        self._lock = threading.Lock()

    def now(self) -> float:
        return self._now_us / 1_000_000

    def now_us(self) -> int:
        return self._now_us

    def tick(self, us: int = 1) -> int:
        with self._lock:
            self._now_us += us
            return self._now_us

    def sleep(self, seconds: float) -> None:
        if seconds > 0:
            with self._lock:
                self._now_us += max(1, round(seconds * 1_000_000))

    advance = sleep


class WallClock:
    def now(self) -> float:
        return time.time()

    def now_us(self) -> int:
        return time.time_ns() // 1000

    def tick(self, us: int = 0) -> int:
        return self.now_us()

    def sleep(self, seconds: float) -> None:
        if seconds > 0:
            time.sleep(seconds)


class TokenBucket:
    """Classic token bucket: ``rate`` tokens per second, at most ``burst`` banked."""

    def __init__(self, rate: float, burst: float | None = None, clock=None):
        if rate <= 0:
            raise ValueError("rate must be positive")
        self.rate = float(rate)
        self.burst = float(burst if burst is not None else max(1.0, rate))
        self.clock = clock or WallClock()
        self._tokens = self.burst
        self._stamp = self.clock.now()
        self._lock = threading.Lock()

    def _refill(self) -> None:
        now = self.clock.now()
        self._tokens = min(self.burst, self._tokens + (now - self._stamp) * self.rate)
        self._stamp = now

    def try_acquire(self, n: float = 1.0) -> bool:
        with self._lock:
            self._refill()
            if self._tokens >= n:
                self._tokens -= n
                return True
            return False

    def acquire(self, n: float = 1.0) -> None:
        """Block (or advance virtual time) until ``n`` tokens are available."""
        while True:
            with self._lock:
                self._refill()
                if self._tokens >= n:
                    self._tokens -= n
                    return
                wait = (n - self._tokens) / self.rate
            self.clock.sleep(wait)
