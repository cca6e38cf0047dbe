"""Survival-probability operators and erosion/consolidation certificates.

The scalar map ``f(x) = 1 - exp(-c k x^(k-1))`` tracks one round of peeling
in a k-uniform Erdos-Renyi hypergraph.  For fuse graphs the survival
probability depends on the segment, so one round acts on a whole sequence
``q : Z -> [0, 1]`` through the operator ``P_hat`` (or its finite-``ell``
restriction ``P``)::

    (P_hat q)(i) = 1 - exp(-c * sum_{j=i-k+1}^{i} prod_{j <= i' < j+k, i' != i} q(i'))

Sequences are stored as a :class:`ProbWindow`: explicit values on
``[-D, D]`` plus a constant extension on either side.  Iterating ``P_hat``
from a step function with a boundary rule that only ever rounds up
(``"a"`` mode) or only ever rounds down (``"b"`` mode) yields finite
certificates that a density ``c`` lies below the erosion threshold or above
the consolidation threshold.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from numba import njit

DEFAULT_D = 50
FIXED_POINT_TOL = 1e-12
GRID_CELLS = 1024

# Extension-rule tags.  Left side: value stored for every index < -D.
LEFT_CONSTANT = "constant-left"  # extension evolves as f(extension)
LEFT_COPY = "copy-boundary"  # extension := new value at -D
LEFT_ZERO = "zero-left"  # extension := 0
# Right side: value for every index > D.
RIGHT_CONSTANT = "constant-right"
RIGHT_COPY = "copy-boundary"
RIGHT_ONE = "one-right"

_LEFT_CODES = {LEFT_CONSTANT: 0, LEFT_COPY: 1, LEFT_ZERO: 2}
_RIGHT_CODES = {RIGHT_CONSTANT: 0, RIGHT_COPY: 1, RIGHT_ONE: 2}

MODES = {
    "free": (LEFT_CONSTANT, RIGHT_CONSTANT),
    "a": (LEFT_COPY, RIGHT_ONE),
    "b": (LEFT_ZERO, RIGHT_COPY),
}


def f_eval(x, k, c):
    """``1 - exp(-c k x^(k-1))``; accepts scalars or arrays."""
    return -np.expm1(-c * k * np.power(x, k - 1))


def f_deriv(x, k, c):
    x = np.asarray(x, dtype=float)
    return c * k * (k - 1) * np.power(x, k - 2) * np.exp(-c * k * np.power(x, k - 1))


# --------------------------------------------------------------------------
# fixed points of f


@dataclass(frozen=True)
class FixedPoints:
    xi1: float
    xi2: float


def _bisect(g, lo, hi, tol):
    glo = g(lo)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        gm = g(mid)
        if (gm > 0) == (glo > 0):
            lo, glo = mid, gm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def fixed_points(k: int, c: float, cells: int = GRID_CELLS, tol: float = FIXED_POINT_TOL) -> Optional[FixedPoints]:
    """Return the two nonzero fixed points of ``f``, or ``None`` if there are none.

    ``g(x) = f(x) - x`` is negative just right of 0 and at 1.  The nonzero
    fixed points are the ends of the interval where ``g >= 0``.  A grid scan
    finds that interval; if no grid point has ``g >= 0`` the cell around the
    grid maximum is searched with a bounded scalar minimiser before giving up,
    so near-tangent densities are not missed.
    """
    if c <= 0:
        return None

    def g(x):
        return float(f_eval(x, k, c)) - x

    xs = np.linspace(0.0, 1.0, cells + 1)[1:]
    gs = f_eval(xs, k, c) - xs
    pos = np.flatnonzero(gs >= 0)
    if pos.size == 0:
        from scipy.optimize import minimize_scalar

        best = int(np.argmax(gs))
        lo = xs[best - 1] if best > 0 else 0.0
        hi = xs[min(best + 1, cells - 1)]
        res = minimize_scalar(lambda x: -g(x), bounds=(lo, hi), method="bounded", options={"xatol": 1e-14})
        if -res.fun < 0:
            return None
        peak = float(res.x)
        left_lo, left_hi = lo, peak
        right_lo, right_hi = peak, hi
    else:
        first, last = pos[0], pos[-1]
        left_lo = xs[first - 1] if first > 0 else 0.0
        left_hi = xs[first]
        right_lo, right_hi = xs[last], xs[last + 1]
        if left_lo == 0.0:
            # g < 0 on (0, eps) but the first grid point is already >= 0
            left_lo = left_hi / cells
            while g(left_lo) >= 0:
                left_lo /= 2
    xi1 = _bisect(g, left_lo, left_hi, tol)
    xi2 = _bisect(g, right_lo, right_hi, tol)
    if xi2 - xi1 <= tol:
        # tangent: a double root
        xi1 = xi2 = 0.5 * (xi1 + xi2)
    return FixedPoints(float(xi1), float(xi2))


# --------------------------------------------------------------------------
# windows


@dataclass(frozen=True)
class ProbWindow:
    """A sequence ``q : Z -> [0, 1]`` stored on ``[-D-1, D]`` plus a right tail.

    ``values[0]`` is the value for every index ``<= -D-1``, ``values[i + D + 1]``
    the value at ``i`` for ``-D <= i <= D``, and ``right`` the value for every
    index ``> D``.
    """

    D: int
    values: np.ndarray
    right: float
    left_mode: str = LEFT_CONSTANT
    right_mode: str = RIGHT_CONSTANT

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.float64)
        if vals.shape != (2 * self.D + 2,):
            raise ValueError(f"expected {2 * self.D + 2} values, got {vals.shape}")
        if np.any(vals < 0) or np.any(vals > 1) or not 0 <= self.right <= 1:
            raise ValueError("window values must lie in [0, 1]")
        if self.left_mode not in _LEFT_CODES or self.right_mode not in _RIGHT_CODES:
            raise ValueError(f"unknown extension rule {self.left_mode!r}/{self.right_mode!r}")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "right", float(self.right))

    @classmethod
    def from_function(cls, D, q: Callable[[int], float], left: float, right: float, mode="free"):
        vals = [left] + [q(i) for i in range(-D, D + 1)]
        lm, rm = MODES[mode]
        return cls(D, np.array(vals, dtype=float), right, lm, rm)

    @classmethod
    def const(cls, D, x, mode="free"):
        return cls.from_function(D, lambda i: x, x, x, mode)

    @classmethod
    def step(cls, D, below, above, mode="free"):
        """``step_below^above``: ``below`` on negative indices, ``above`` on ``i >= 0``."""
        return cls.from_function(D, lambda i: above if i >= 0 else below, below, above, mode)

    @property
    def left(self) -> float:
        return float(self.values[0])

    @property
    def core(self) -> np.ndarray:
        """Values on ``[-D, D]``."""
        return self.values[1:]

    def __call__(self, i: int) -> float:
        if i < -self.D:
            return self.left
        if i > self.D:
            return self.right
        return float(self.values[i + self.D + 1])

    def padded(self, pad: int) -> np.ndarray:
        """Values on ``[-D-pad, D+pad]``."""
        return np.concatenate([np.full(pad, self.left), self.core, np.full(pad, self.right)])

    def with_mode(self, mode: str) -> "ProbWindow":
        lm, rm = MODES[mode]
        return ProbWindow(self.D, self.values, self.right, lm, rm)


def _phat_core(padded: np.ndarray, k: int, c: float) -> np.ndarray:
    """Apply ``P_hat`` to a padded array; returns values for the inner positions.

    ``padded`` must carry ``k-1`` entries of context on each side.
    """
    w = padded.shape[0] - 2 * (k - 1)
    idx = np.arange(w) + (k - 1)
    total = np.zeros(w)
    for s in range(k):  # edge type j = i - s, edge covers [i-s, i-s+k-1]
        prod = np.ones(w)
        for t in range(k):
            if t != s:
                prod = prod * padded[idx - s + t]
        total = total + prod
    return -np.expm1(-c * total)


def apply_phat(q: ProbWindow, k: int, c: float, mode: Optional[str] = None) -> ProbWindow:
    """One application of ``P_hat`` on the window; extensions follow ``mode``.

    Values on ``[-D, D]`` are exact (neighbours outside the window are read
    through the current extensions).  ``mode`` picks the new extensions:
    ``"free"`` maps each constant tail through ``f``, ``"a"`` copies the new
    value at ``-D`` leftward and pins the right tail to 1, ``"b"`` pins the
    left tail to 0 and copies the new value at ``D`` rightward.  By default
    the window's own rules are kept.
    """
    if mode is not None:
        q = q.with_mode(mode)
    new = _phat_core(q.padded(k - 1), k, c)
    if q.left_mode == LEFT_CONSTANT:
        left = float(f_eval(q.left, k, c))
    elif q.left_mode == LEFT_COPY:
        left = new[0]
    else:
        left = 0.0
    if q.right_mode == RIGHT_CONSTANT:
        right = float(f_eval(q.right, k, c))
    elif q.right_mode == RIGHT_COPY:
        right = new[-1]
    else:
        right = 1.0
    return ProbWindow(q.D, np.concatenate([[left], new]), right, q.left_mode, q.right_mode)


def apply_phat_exact(values: np.ndarray, k: int, c: float) -> np.ndarray:
    """``P_hat`` on a finitely supported sequence (zero outside ``values``).

    Returns a sequence ``k-1`` longer on both sides, so no information is lost.
    """
    pad = 2 * (k - 1)
    padded = np.concatenate([np.zeros(pad), np.asarray(values, float), np.zeros(pad)])
    return _phat_core(padded, k, c)


def apply_p(q, k: int, c: float, ell: int) -> np.ndarray:
    """Finite operator ``P`` on sequences indexed by ``I = {0, ..., ell+k-2}``.

    Indices outside ``I`` read as 0 and only edge types in ``{0, ..., ell-1}``
    contribute.
    """
    q = np.asarray(q, dtype=float)
    size = ell + k - 1
    if q.shape != (size,):
        raise ValueError(f"expected {size} values, got {q.shape}")
    total = np.zeros(size)
    for i in range(size):
        for j in range(max(0, i - k + 1), min(i, ell - 1) + 1):
            prod = 1.0
            for t in range(j, j + k):
                if t != i:
                    prod *= q[t]
            total[i] += prod
    return -np.expm1(-c * total)


def iterate_p(k: int, c: float, ell: int, rounds: int) -> np.ndarray:
    """Rows ``P^r 1_I`` for ``r = 0..rounds``; shape ``(rounds+1, ell+k-1)``."""
    out = np.empty((rounds + 1, ell + k - 1))
    out[0] = 1.0
    for r in range(rounds):
        out[r + 1] = apply_p(out[r], k, c, ell)
    return out


def iterate_phat_indicator(k: int, c: float, ell: int, rounds: int) -> np.ndarray:
    """``P_hat^r 1_I`` restricted to ``I``, for ``r = 0..rounds``."""
    size = ell + k - 1
    out = np.empty((rounds + 1, size))
    seq = np.ones(size)
    out[0] = seq
    offset = 0
    for r in range(rounds):
        seq = apply_phat_exact(seq, k, c)
        offset += k - 1
        out[r + 1] = seq[offset:offset + size]
    return out


# --------------------------------------------------------------------------
# long iteration kernel

_STOP_NONE, _STOP_BELOW_AT_0, _STOP_ABOVE_AT_M1 = 0, 1, 2
_RAN_OUT, _HIT, _STATIONARY = 0, 1, 2


@njit(cache=True)
def _iterate_kernel(core, left, right, k, c, left_code, right_code, max_steps, stop_kind, target):
    """Iterate ``P_hat`` in place on ``core`` (values on ``[-D, D]``).

    Returns ``(steps, status, left, right)``.
    """
    w = core.shape[0]
    D = (w - 1) // 2
    pad = k - 1
    buf = np.empty(w + 2 * pad)
    new = np.empty(w)
    for step in range(1, max_steps + 1):
        for p in range(pad):
            buf[p] = left
            buf[pad + w + p] = right
        for p in range(w):
            buf[pad + p] = core[p]
        for p in range(w):
            total = 0.0
            for s in range(k):
                prod = 1.0
                for t in range(k):
                    if t != s:
                        prod *= buf[pad + p - s + t]
                total += prod
            new[p] = -math.expm1(-c * total)
        if left_code == 0:
            nleft = -math.expm1(-c * k * left ** (k - 1))
        elif left_code == 1:
            nleft = new[0]
        else:
            nleft = 0.0
        if right_code == 0:
            nright = -math.expm1(-c * k * right ** (k - 1))
        elif right_code == 1:
            nright = new[w - 1]
        else:
            nright = 1.0
        same = nleft == left and nright == right
        for p in range(w):
            if same and new[p] != core[p]:
                same = False
            core[p] = new[p]
        left = nleft
        right = nright
        if stop_kind == 1 and core[D] < target:
            return step, 1, left, right
        if stop_kind == 2 and core[D - 1] > target:
            return step, 1, left, right
        if same:
            return step, 2, left, right
    return max_steps, 0, left, right


def iterate_window(q: ProbWindow, k: int, c: float, steps: int) -> ProbWindow:
    """Apply ``P_hat`` ``steps`` times using the compiled kernel (no early stop)."""
    core = np.array(q.core, dtype=np.float64)
    _, _, left, right = _iterate_kernel(
        core, q.left, q.right, k, c, _LEFT_CODES[q.left_mode], _RIGHT_CODES[q.right_mode],
        steps, _STOP_NONE, 0.0,
    )
    return ProbWindow(q.D, np.concatenate([[left], core]), right, q.left_mode, q.right_mode)


# --------------------------------------------------------------------------
# certificates


class Verdict(enum.Enum):
    ERODING = "eroding"
    CONSOLIDATING = "consolidating"
    UNDECIDED = "undecided"


@dataclass(frozen=True)
class CheckResult:
    """Outcome of an erosion or consolidation check.

    ``iterations`` is the certificate ``R`` when the verdict is decided,
    otherwise the number of iterations run before giving up.  ``reason`` is
    ``"condition"``, ``"stationary"`` or ``"max_iter"``.
    """

    verdict: Verdict
    k: int
    c: float
    D: int
    iterations: int
    reason: str
    threshold: float
    final_value: float
    trace: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    @property
    def decided(self) -> bool:
        return self.verdict is not Verdict.UNDECIDED


class ThresholdError(ValueError):
    pass


def _require_fixed_points(k, c):
    if k < 3:
        raise ThresholdError(f"k must be >= 3, got {k}")
    fp = fixed_points(k, c)
    if fp is None or fp.xi1 >= fp.xi2:
        raise ThresholdError(f"f has no pair of distinct nonzero fixed points at k={k}, c={c}")
    return fp


def _run_check(window, k, c, max_iter, stop_kind, target, probe, trace_every):
    core = np.array(window.core, dtype=np.float64)
    left, right = window.left, window.right
    lc, rc = _LEFT_CODES[window.left_mode], _RIGHT_CODES[window.right_mode]
    done = 0
    trace = []
    chunk = trace_every if trace_every else max_iter
    status = _RAN_OUT
    if trace_every:
        trace.append((0, core[window.D + probe]))
    while done < max_iter:
        n = min(chunk, max_iter - done)
        steps, status, left, right = _iterate_kernel(core, left, right, k, c, lc, rc, n, stop_kind, target)
        done += steps
        if trace_every:
            trace.append((done, core[window.D + probe]))
        if status != _RAN_OUT:
            break
    reason = {_RAN_OUT: "max_iter", _HIT: "condition", _STATIONARY: "stationary"}[status]
    tr = np.array(trace) if trace_every else None
    return status == _HIT, done, reason, float(core[window.D + probe]), tr


def erosion_check(k: int, c: float, D: int = DEFAULT_D, max_iter: int = 10**7, trace_every: int = 0) -> CheckResult:
    """Try to certify ``c < er_k``.

    Iterates ``a_r`` from ``step_{xi1/2}^1`` with the upward-rounding boundary
    rules and stops at the first ``r`` with ``a_r(0) < xi1/2`` (eroding), when
    the window stops changing, or after ``max_iter`` iterations.
    """
    fp = _require_fixed_points(k, c)
    target = fp.xi1 / 2
    a0 = ProbWindow.step(D, target, 1.0, mode="a")
    hit, done, reason, value, trace = _run_check(a0, k, c, max_iter, _STOP_BELOW_AT_0, target, 0, trace_every)
    verdict = Verdict.ERODING if hit else Verdict.UNDECIDED
    return CheckResult(verdict, k, c, D, done, reason, target, value, trace)


def consolidation_check(k: int, c: float, D: int = DEFAULT_D, max_iter: int = 10**7, trace_every: int = 0) -> CheckResult:
    """Try to certify ``c > co_k``; mirror image of :func:`erosion_check`.

    Iterates ``b_r`` from ``step_0^{(xi1+xi2)/2}`` with the downward-rounding
    boundary rules until ``b_r(-1) > (xi1+xi2)/2``.
    """
    fp = _require_fixed_points(k, c)
    target = (fp.xi1 + fp.xi2) / 2
    b0 = ProbWindow.step(D, 0.0, target, mode="b")
    hit, done, reason, value, trace = _run_check(b0, k, c, max_iter, _STOP_ABOVE_AT_M1, target, -1, trace_every)
    verdict = Verdict.CONSOLIDATING if hit else Verdict.UNDECIDED
    return CheckResult(verdict, k, c, D, done, reason, target, value, trace)


# --------------------------------------------------------------------------
# bracketing


@dataclass(frozen=True)
class ThresholdBracket:
    """Verified eroding density ``lower`` and consolidating density ``upper``."""

    k: int
    lower: float
    upper: float
    iterations_used: int
    lower_certificate: CheckResult = field(repr=False)
    upper_certificate: CheckResult = field(repr=False)
    undecided: tuple = ()

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def contains(self, c: float) -> bool:
        return self.lower <= c <= self.upper


class BracketError(ThresholdError):
    def __init__(self, message, interval):
        super().__init__(message)
        self.interval = interval


def tangency_density(k: int, tol: float = 1e-9) -> float:
    """Smallest ``c`` at which ``f`` acquires a nonzero fixed point (the ER peeling threshold)."""
    lo, hi = 0.1, 1.0
    while fixed_points(k, hi) is None:
        hi *= 2
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if fixed_points(k, mid) is None:
            lo = mid
        else:
            hi = mid
    return hi


def bracket_threshold(k: int, D: int = DEFAULT_D, max_iter: int = 10**7, tol: float = 1e-4,
                      log: Optional[Callable[[str], None]] = None) -> ThresholdBracket:
    """Bisect for the densities where erosion and consolidation can be certified.

    Starts from a density just above the ER peeling threshold (eroding) and
    ``c = 1`` (consolidating; the range is widened upward if needed).  Each
    midpoint is tested for erosion, then for consolidation; a midpoint that
    is neither is recorded as undecided and the two sides are then bisected
    independently against it.  Stops once both sides are resolved to
    ``tol / 2``, so the result has width ``<= tol`` unless an undecided gap
    wider than that separates the two thresholds.
    """
    say = log or (lambda msg: None)
    used = 0

    def erodes(c):
        nonlocal used
        res = erosion_check(k, c, D, max_iter)
        used += res.iterations
        say(f"k={k} c={c:.12f} erosion: {res.verdict.value} after {res.iterations} ({res.reason})")
        return res

    def consolidates(c):
        nonlocal used
        res = consolidation_check(k, c, D, max_iter)
        used += res.iterations
        say(f"k={k} c={c:.12f} consolidation: {res.verdict.value} after {res.iterations} ({res.reason})")
        return res

    ck = tangency_density(k)
    lo = ck + 1e-3 * (1 - ck)
    lo_cert = erodes(lo)
    if not lo_cert.decided:
        raise BracketError(f"could not certify erosion at c={lo}", (lo, None))
    hi, hi_cert = 1.0, None
    for _ in range(8):
        hi_cert = consolidates(hi)
        if hi_cert.decided:
            break
        hi += 0.25
    if not hi_cert.decided:
        raise BracketError(f"could not certify consolidation up to c={hi}", (lo, hi))

    # undecided interval [u_lo, u_hi] between the two sides, empty at first
    u_lo = u_hi = None
    undecided = []
    half = tol / 2
    while True:
        left_open = (u_lo if u_lo is not None else hi) - lo > (half if u_lo is not None else tol)
        right_open = hi - (u_hi if u_hi is not None else lo) > (half if u_hi is not None else tol)
        if u_lo is None:
            if hi - lo <= tol:
                break
            mid = 0.5 * (lo + hi)
            res = erodes(mid)
            if res.decided:
                lo, lo_cert = mid, res
                continue
            res = consolidates(mid)
            if res.decided:
                hi, hi_cert = mid, res
                continue
            u_lo = u_hi = mid
            undecided.append(mid)
            continue
        if not (left_open or right_open):
            break
        if left_open:
            mid = 0.5 * (lo + u_lo)
            res = erodes(mid)
            if res.decided:
                lo, lo_cert = mid, res
            else:
                u_lo = mid
                undecided.append(mid)
        if right_open:
            mid = 0.5 * (u_hi + hi)
            res = consolidates(mid)
            if res.decided:
                hi, hi_cert = mid, res
            else:
                u_hi = mid
                undecided.append(mid)
    return ThresholdBracket(k, lo, hi, used, lo_cert, hi_cert, tuple(sorted(undecided)))
