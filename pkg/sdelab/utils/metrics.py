import math
import time

import numpy as np


class DataLogger(object):
    """Running mean and standard error over values fed in a fixed order.

    ``update`` takes either one value or an array of per-path values. Batch
    sums go through ``math.fsum`` and are combined in update order.
    """

    def __init__(self):
        self.clear()

    def clear(self):
        self.value = 0
        self._sums = []
        self._squares = []
        self.cnt = 0
        self.avg = 0
        self.std = 0

    def update(self, value, n=1):
        values = np.asarray(value, dtype=float).reshape(-1)
        if values.size == 1 and n > 1:
            values = np.repeat(values, n)
        self.value = values[-1] if values.size else self.value
        self._sums.append(math.fsum(values))
        self._squares.append(math.fsum(values * values))
        self.cnt += values.size
        self._cal_avg()

    def _cal_avg(self):
        if self.cnt == 0:
            return
        total = math.fsum(self._sums)
        self.avg = total / self.cnt
        if self.cnt > 1:
            var = (math.fsum(self._squares) - total * self.avg) / (self.cnt - 1)
            self.std = math.sqrt(max(var, 0.0))
        else:
            self.std = 0.0

    @property
    def stderr(self):
        if self.cnt == 0:
            return float('nan')
        return self.std / math.sqrt(self.cnt)


class StageTimer(object):
    """Wall-clock seconds per named stage."""

    def __init__(self):
        self.records = {}
        self._start = {}

    def start(self, name):
        self._start[name] = time.perf_counter()

    def stop(self, name):
        begin = self._start.pop(name, None)
        if begin is None:
            return 0.0
        elapsed = time.perf_counter() - begin
        self.records[name] = self.records.get(name, 0.0) + elapsed
        return elapsed


def calc_wilson_interval(successes, trials, confidence=0.95):
    """Wilson score interval of a binomial proportion."""
    from scipy.stats import binomtest

    if trials == 0:
        return float('nan'), float('nan')
    ci = binomtest(int(successes), int(trials)).proportion_ci(
        confidence_level=confidence, method='wilson')
    return float(ci.low), float(ci.high)


def calc_trend(x, y):
    """Least-squares line through (x, y); returns (slope, intercept, r2)."""
    from scipy.stats import linregress

    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2:
        return 0.0, float(y[0]) if y.size else 0.0, 0.0
    if np.ptp(y) <= 1e-12 * max(1.0, float(np.max(np.abs(y)))):
        return 0.0, float(y[0]), 1.0
    fit = linregress(x, y)
    return float(fit.slope), float(fit.intercept), float(fit.rvalue ** 2)
