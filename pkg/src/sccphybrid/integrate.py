"""Explicit Dormand-Prince 5(4) stepper with dense output.

The right-hand side is autonomous, ``f(z) -> ndarray``.  Each accepted step
yields a :class:`Segment` that can be evaluated anywhere inside the step,
which is what event localization bisects on.
"""
from __future__ import annotations

from typing import Callable

import numpy as np

C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
# difference between the 5th and the embedded 4th order weights
E = np.array([-71 / 57600, 0.0, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40])
# continuous extension: y(t0 + s h) = y0 + h K^T P [s, s^2, s^3, s^4]
P = np.array([
    [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0, 0, 0, 0],
    [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0


class StepFailure(RuntimeError):
    pass


class Segment:
    """One accepted step with its interpolant."""

    __slots__ = ("t0", "t1", "z0", "z1", "_Q")

    def __init__(self, t0, t1, z0, z1, K):
        self.t0, self.t1, self.z0, self.z1 = t0, t1, z0, z1
        self._Q = K.T @ P

    def __call__(self, t: float) -> np.ndarray:
        if t >= self.t1:
            return self.z1
        if t <= self.t0:
            return self.z0
        h = self.t1 - self.t0
        s = (t - self.t0) / h
        return self.z0 + h * (self._Q @ np.array([s, s * s, s ** 3, s ** 4]))


def _rms(x):
    return float(np.sqrt(np.mean(x * x))) if x.size else 0.0


class DormandPrince:
    """Adaptive stepper.

    ``reject(z)`` may veto an otherwise accepted step (the step is retried
    at half the size); persistent vetoes end in StepFailure.
    """

    def __init__(self, fun: Callable, t0: float, z0, rtol=1e-6, atol=1e-9,
                 max_step=np.inf, h0: float | None = None,
                 reject: Callable | None = None):
        self.fun = fun
        self.t = float(t0)
        self.z = np.asarray(z0, dtype=float)
        self.rtol, self.atol = rtol, atol
        self.max_step = max_step
        self.reject = reject
        self.f = np.asarray(fun(self.z), dtype=float)
        self.h = h0 if h0 else self._initial_step()
        self.n_steps = 0

    def _initial_step(self) -> float:
        scale = self.atol + self.rtol * np.abs(self.z)
        d0, d1 = _rms(self.z / scale), _rms(self.f / scale)
        h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
        h0 = min(h0, self.max_step)
        z1 = self.z + h0 * self.f
        f1 = np.asarray(self.fun(z1), dtype=float)
        d2 = _rms((f1 - self.f) / scale) / h0
        if max(d1, d2) <= 1e-15:
            h1 = max(1e-6, h0 * 1e-3)
        else:
            h1 = (0.01 / max(d1, d2)) ** (1 / 5)
        return min(100 * h0, h1, self.max_step)

    def _attempt(self, h):
        z, fun = self.z, self.fun
        K = np.empty((7, z.size))
        K[0] = self.f
        for s in range(1, 6):
            K[s] = fun(z + h * (A[s] @ K[:s]))
        z_new = z + h * (A[6] @ K[:6])
        K[6] = fun(z_new)
        err = h * (E @ K)
        scale = self.atol + self.rtol * np.maximum(np.abs(z), np.abs(z_new))
        return z_new, K, _rms(err / scale)

    def step(self, t_limit: float) -> Segment:
        """Advance by one accepted step, never past ``t_limit``."""
        min_step = 16 * np.spacing(max(abs(self.t), 1.0))
        h = min(self.h, self.max_step)
        while True:
            last = False
            if self.t + h >= t_limit:
                h = t_limit - self.t
                last = True
            if h < min_step and last and h > 0:
                # sliver up to the limit: a single Euler step is exact to rounding
                K = np.tile(self.f, (7, 1))
                z_new = self.z + h * self.f
                seg = Segment(self.t, t_limit, self.z, z_new, K)
                self.t, self.z = t_limit, z_new
                self.n_steps += 1
                return seg
            if h < min_step:
                raise StepFailure(f"step size {h:g} below minimum at t={self.t:g}")
            z_new, K, err = self._attempt(h)
            if not np.all(np.isfinite(z_new)):
                raise StepFailure(f"non-finite state at t={self.t:g}")
            if err <= 1.0 and (self.reject is None or not self.reject(z_new)):
                break
            if err <= 1.0:
                h *= 0.5
            else:
                h *= max(MIN_FACTOR, SAFETY * err ** (-1 / 5))
        t1 = t_limit if last else self.t + h
        seg = Segment(self.t, t1, self.z, z_new, K)
        factor = MAX_FACTOR if err == 0 else min(MAX_FACTOR, SAFETY * err ** (-1 / 5))
        if not last:
            self.h = min(h * factor, self.max_step)
        self.t, self.z, self.f = t1, z_new, K[6]
        self.n_steps += 1
        return seg
