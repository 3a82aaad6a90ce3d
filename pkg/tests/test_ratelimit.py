import threading

import pytest

from wikicite.ratelimit import SimulatedClock, TokenBucket


def drive(rps: float, requests: int) -> list[int]:
    """Issue ``requests`` acquires against a simulated clock; times in us."""
    clock = SimulatedClock()
    bucket = TokenBucket(rps, clock=clock.monotonic, sleep=clock.sleep)
    grants = []
    for _ in range(requests):
        bucket.acquire()
        grants.append(clock.now_us)
    return grants


def max_window_load(grants_us: list[int], window_us: int = 1_000_000) -> int:
    worst = 0
    j = 0
    for i in range(len(grants_us)):
        if j < i:
            j = i
        while j < len(grants_us) and grants_us[j] < grants_us[i] + window_us:
            j += 1
        worst = max(worst, j - i)
    return worst


def test_first_grant_is_immediate():
    grants = drive(rps=10, requests=1)
    assert grants == [0]


def test_no_sliding_second_exceeds_rate_at_50():
    grants = drive(rps=50, requests=10_000)
    assert len(grants) == 10_000
    assert max_window_load(grants) <= 50


def test_window_load_exactly_five_at_rps_5():
    grants = drive(rps=5, requests=1_000)
    assert max_window_load(grants, window_us=1_000_000) == 5


def test_grants_monotonic_nondecreasing():
    grants = drive(rps=7, requests=500)
    assert all(b >= a for a, b in zip(grants, grants[1:]))


def test_invalid_rate_rejected():
    with pytest.raises(ValueError):
        TokenBucket(0)
    with pytest.raises(ValueError):
        TokenBucket(-3)


def test_capacity_allows_burst_then_paces():
    clock = SimulatedClock()
    bucket = TokenBucket(10, capacity=3, clock=clock.monotonic, sleep=clock.sleep)
    times = []
    for _ in range(5):
        bucket.acquire()
        times.append(clock.now_us)
    assert times[0] == times[1] == times[2] == 0  # burst from the full bucket
    assert times[3] > 0 and times[4] > times[3]


def test_thread_safety_real_clock():
    bucket = TokenBucket(5000)
    grants = []
    lock = threading.Lock()

    def worker():
        for _ in range(25):
            t = bucket.acquire()
            with lock:
                grants.append(t)

    threads = [threading.Thread(target=worker) for _ in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert len(grants) == 100
