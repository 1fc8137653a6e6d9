"""Perception and training kernels: event masks, cross-attention fusion, losses.

Everything here is desk-scale reference math for the learned pipeline around
the planner: binary event masks from polarity imbalance, two-frame event
synthesis, scaled dot-product attention (forward and analytic gradients),
bidirectional feature fusion, and the imitation loss with its proximity
penalty. A self-check suite backs the command line's kernels-check report.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

#: Fixed-time event accumulation window, microseconds.
DEFAULT_WINDOW_US = 10_000

#: Proximity penalty is active at or below this obstacle distance (meters).
PENALTY_CUTOFF = 0.5

W_VELOCITY = 0.7
W_PENALTY = 0.3


@dataclass(frozen=True)
class Event:
    """One brightness-change event: pixel, microsecond timestamp, polarity."""

    x: int
    y: int
    t: int
    p: int

    def __post_init__(self):
        if self.p not in (-1, 1):
            raise ValueError(f"polarity must be +1 or -1, got {self.p}")


@dataclass(frozen=True, eq=False)
class EventWindow:
    """Events collected over [t_start, t_end) on a height-by-width sensor."""

    events: tuple[Event, ...]
    t_start: int
    t_end: int
    height: int
    width: int

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))
        if self.t_end <= self.t_start:
            raise ValueError("window must satisfy t_end > t_start")
        if self.height <= 0 or self.width <= 0:
            raise ValueError("sensor dimensions must be positive")
        for e in self.events:
            if not (self.t_start <= e.t < self.t_end):
                raise ValueError(f"event timestamp {e.t} outside window")


def encode_bem(window: EventWindow) -> np.ndarray:
    """Binary event mask: 1 where positive and negative counts differ.

    Returns a uint8 (height, width) array indexed [y, x]. Events outside the
    sensor area are an input error.
    """
    acc = np.zeros((window.height, window.width), dtype=np.int64)
    if window.events:
        xs = np.fromiter((e.x for e in window.events), dtype=np.int64, count=len(window.events))
        ys = np.fromiter((e.y for e in window.events), dtype=np.int64, count=len(window.events))
        ps = np.fromiter((e.p for e in window.events), dtype=np.int64, count=len(window.events))
        if (xs < 0).any() or (xs >= window.width).any() or (ys < 0).any() or (ys >= window.height).any():
            raise ValueError("event pixel outside the sensor area")
        np.add.at(acc, (ys, xs), ps)
    return (acc != 0).astype(np.uint8)


def synth_events(frame_a, frame_b, contrast_threshold: float, window=(0, DEFAULT_WINDOW_US)) -> EventWindow:
    """Idealized two-frame event synthesis.

    Each pixel emits floor(|log b - log a| / C) events with the polarity of
    the log-intensity change, timestamps spread evenly over the window.
    Intensities must be positive.
    """
    a = np.asarray(frame_a, dtype=float)
    b = np.asarray(frame_b, dtype=float)
    if a.shape != b.shape or a.ndim != 2:
        raise ValueError("frames must be two equal-shape 2-D arrays")
    if (a <= 0.0).any() or (b <= 0.0).any():
        raise ValueError("frame intensities must be positive")
    if contrast_threshold <= 0.0:
        raise ValueError("contrast_threshold must be positive")
    t0, t1 = int(window[0]), int(window[1])
    if t1 <= t0:
        raise ValueError("window must satisfy t_end > t_start")
    dlog = np.log(b) - np.log(a)
    counts = np.floor(np.abs(dlog) / contrast_threshold).astype(int)
    span = t1 - t0
    events = []
    for y, x in zip(*np.nonzero(counts)):
        k = int(counts[y, x])
        pol = 1 if dlog[y, x] > 0.0 else -1
        for j in range(k):
            t = min(t0 + round((j + 1) * span / (k + 1)), t1 - 1)
            events.append(Event(int(x), int(y), int(t), pol))
    return EventWindow(tuple(events), t0, t1, a.shape[0], a.shape[1])


def _softmax_rows(s: np.ndarray) -> np.ndarray:
    shifted = s - s.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _check_attention_shapes(q, k, v):
    if q.ndim != 2 or k.ndim != 2 or v.ndim != 2:
        raise ValueError("attention inputs must be 2-D (features x tokens)")
    if q.shape[0] != k.shape[0]:
        raise ValueError(f"query/key feature dims differ: {q.shape[0]} vs {k.shape[0]}")
    if k.shape[1] != v.shape[1]:
        raise ValueError(f"key/value token counts differ: {k.shape[1]} vs {v.shape[1]}")


def attention_forward(q, k, v) -> np.ndarray:
    """Scaled dot-product attention with tokens as columns.

    Scores are q^T k / sqrt(d_k); each query's weights over the keys are a
    max-subtracted softmax; output column j is the weighted combination of
    value columns, shape (d_v, n_queries).
    """
    q = np.asarray(q, dtype=float)
    k = np.asarray(k, dtype=float)
    v = np.asarray(v, dtype=float)
    _check_attention_shapes(q, k, v)
    s = (q.T @ k) / math.sqrt(q.shape[0])
    a = _softmax_rows(s)
    return v @ a.T


def attention_weights(q, k) -> np.ndarray:
    """The (n_queries, n_keys) softmax weight matrix; each row sums to one."""
    q = np.asarray(q, dtype=float)
    k = np.asarray(k, dtype=float)
    if q.shape[0] != k.shape[0]:
        raise ValueError(f"query/key feature dims differ: {q.shape[0]} vs {k.shape[0]}")
    return _softmax_rows((q.T @ k) / math.sqrt(q.shape[0]))


def attention_gradients(q, k, v, upstream) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Analytic gradients of sum(upstream * attention_forward(q, k, v)).

    upstream must match the forward output shape. Returns (dq, dk, dv).
    """
    q = np.asarray(q, dtype=float)
    k = np.asarray(k, dtype=float)
    v = np.asarray(v, dtype=float)
    upstream = np.asarray(upstream, dtype=float)
    _check_attention_shapes(q, k, v)
    if upstream.shape != (v.shape[0], q.shape[1]):
        raise ValueError(f"upstream shape {upstream.shape} != output shape {(v.shape[0], q.shape[1])}")
    scale = 1.0 / math.sqrt(q.shape[0])
    a = _softmax_rows((q.T @ k) * scale)
    dv = upstream @ a
    da = upstream.T @ v
    ds = a * (da - (da * a).sum(axis=1, keepdims=True))
    dq = (k @ ds.T) * scale
    dk = (q @ ds) * scale
    return dq, dk, dv


def bidirectional_fuse(depth, event) -> np.ndarray:
    """Element-wise sum of the two cross-attention directions.

    depth and event are (Q, K, V) triples; depth queries attend the event
    keys/values and vice versa, and the directional outputs are added.
    """
    q_depth, k_depth, v_depth = depth
    q_event, k_event, v_event = event
    depth_from_event = attention_forward(q_depth, k_event, v_event)
    event_from_depth = attention_forward(q_event, k_depth, v_depth)
    if depth_from_event.shape != event_from_depth.shape:
        raise ValueError(
            f"directional outputs {depth_from_event.shape} and {event_from_depth.shape} "
            "must share a shape for element-wise fusion"
        )
    return depth_from_event + event_from_depth


def penalty(d_near: float) -> float:
    """Proximity penalty 2 e^(-3 d) for d <= 0.5 m, zero beyond.

    Negative distance means penetration, which is a collision case, not a
    penalty case.
    """
    if d_near < 0.0:
        raise ValueError("d_near must be >= 0")
    if d_near <= PENALTY_CUTOFF:
        return 2.0 * math.exp(-3.0 * d_near)
    return 0.0


@dataclass(frozen=True)
class VelocityCommand:
    """Direction-only command: unit xy-speed, zero vertical component.

    Multiply by the speed setpoint (`scaled`) to get a physical command.
    """

    vx: float
    vy: float
    vz: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.vx, self.vy, self.vz])

    def scaled(self, v_set: float) -> np.ndarray:
        return v_set * self.as_array()


def normalize_command_xy(raw) -> VelocityCommand:
    """Project a raw command to the xy-plane and scale to unit planar speed."""
    r = np.asarray(raw, dtype=float)
    if r.shape != (3,):
        raise ValueError("raw command must have 3 components")
    n = math.hypot(r[0], r[1])
    if n < 1e-12:
        raise ValueError("command has no xy component to normalize")
    return VelocityCommand(float(r[0] / n), float(r[1] / n), 0.0)


@dataclass(frozen=True)
class LossBreakdown:
    total: float
    velocity: float
    penalty: float


def _as_command_array(v) -> np.ndarray:
    if isinstance(v, VelocityCommand):
        return v.as_array()
    arr = np.asarray(v, dtype=float)
    if arr.shape != (3,):
        raise ValueError("velocity command must have 3 components")
    return arr


def total_loss(v_expert, v_pred, d_near: float) -> LossBreakdown:
    """Imitation loss: 0.7 * squared command error + 0.3 * proximity penalty."""
    e = _as_command_array(v_expert)
    p = _as_command_array(v_pred)
    vel = float(((e - p) ** 2).sum())
    pen = penalty(d_near)
    return LossBreakdown(W_VELOCITY * vel + W_PENALTY * pen, vel, pen)


def write_bem_pgm(mask, path) -> None:
    """Write a binary mask as binary PGM (P5), scaling 1 to 255."""
    m = np.asarray(mask)
    if m.ndim != 2:
        raise ValueError("mask must be 2-D")
    if not np.isin(m, (0, 1)).all():
        raise ValueError("mask must be binary")
    header = f"P5\n{m.shape[1]} {m.shape[0]}\n255\n".encode("ascii")
    Path(path).write_bytes(header + (m.astype(np.uint8) * 255).tobytes())


# ---------------------------------------------------------------------------
# self-checks backing the kernels-check command


@dataclass(frozen=True)
class KernelCheck:
    name: str
    error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.error <= self.tolerance


def _random_window(rng, height=32, width=32, count=1000) -> EventWindow:
    xs = rng.integers(0, width, size=count)
    ys = rng.integers(0, height, size=count)
    ts = rng.integers(0, DEFAULT_WINDOW_US, size=count)
    ps = rng.choice((-1, 1), size=count)
    events = tuple(Event(int(x), int(y), int(t), int(p)) for x, y, t, p in zip(xs, ys, ts, ps))
    return EventWindow(events, 0, DEFAULT_WINDOW_US, height, width)


def _mask_oracle(window: EventWindow) -> np.ndarray:
    # independent per-pixel polarity bookkeeping, no array accumulation
    sums: dict[tuple[int, int], int] = {}
    for e in window.events:
        sums[(e.y, e.x)] = sums.get((e.y, e.x), 0) + e.p
    out = np.zeros((window.height, window.width), dtype=np.uint8)
    for (y, x), s in sums.items():
        out[y, x] = 1 if s != 0 else 0
    return out


def _attention_forward_extended(q, k, v) -> np.ndarray:
    ql = np.asarray(q, dtype=np.longdouble)
    kl = np.asarray(k, dtype=np.longdouble)
    vl = np.asarray(v, dtype=np.longdouble)
    s = (ql.T @ kl) / np.sqrt(np.longdouble(ql.shape[0]))
    e = np.exp(s)
    a = e / e.sum(axis=1, keepdims=True)
    return np.asarray(vl @ a.T, dtype=float)


def _gradient_fd_error(q, k, v, upstream, h: float = 1e-6) -> float:
    """Max deviation of analytic gradients from central differences, relative
    to the largest finite-difference entry per input matrix."""

    def loss(q_, k_, v_):
        return float((np.asarray(upstream) * attention_forward(q_, k_, v_)).sum())

    analytic = attention_gradients(q, k, v, upstream)
    worst = 0.0
    mats = [np.array(q, dtype=float), np.array(k, dtype=float), np.array(v, dtype=float)]
    for which, grad in enumerate(analytic):
        num = np.zeros_like(mats[which])
        for idx in np.ndindex(*mats[which].shape):
            orig = mats[which][idx]
            mats[which][idx] = orig + h
            up = loss(*mats)
            mats[which][idx] = orig - h
            down = loss(*mats)
            mats[which][idx] = orig
            num[idx] = (up - down) / (2.0 * h)
        scale = max(float(np.abs(num).max()), 1e-12)
        worst = max(worst, float(np.abs(grad - num).max()) / scale)
    return worst


def run_kernel_checks(seed: int = 0) -> list[KernelCheck]:
    """Deterministic self-check suite; every check reports error vs tolerance."""
    rng = np.random.default_rng(seed)
    checks = []

    checks.append(KernelCheck("penalty(0) == 2", abs(penalty(0.0) - 2.0), 1e-12))
    checks.append(
        KernelCheck("penalty(0.5) == 2*exp(-1.5)", abs(penalty(0.5) - 2.0 * math.exp(-1.5)), 1e-12)
    )
    checks.append(KernelCheck("penalty(0.51) == 0", abs(penalty(0.51)), 1e-12))
    worked = total_loss((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), 0.5).total
    checks.append(KernelCheck("total_loss worked example", abs(worked - 1.53388), 1e-4))
    norm = normalize_command_xy((3.0, 4.0, 5.0)).as_array()
    checks.append(
        KernelCheck(
            "normalize_command_xy((3,4,5))",
            float(np.abs(norm - np.array([0.6, 0.8, 0.0])).max()),
            1e-12,
        )
    )

    bem_err = 0.0
    for _ in range(100):
        w = _random_window(rng)
        bem_err = max(bem_err, float(np.abs(encode_bem(w).astype(int) - _mask_oracle(w).astype(int)).max()))
    checks.append(KernelCheck("BEM vs polarity-sum oracle (100 windows)", bem_err, 0.0))

    fwd_err = sum_err = shift_err = 0.0
    for _ in range(20):
        q = rng.standard_normal((8, 16))
        k = rng.standard_normal((8, 16))
        v = rng.standard_normal((8, 16))
        out = attention_forward(q, k, v)
        ref = _attention_forward_extended(q, k, v)
        fwd_err = max(fwd_err, float(np.abs(out - ref).max() / max(np.abs(ref).max(), 1e-12)))
        a = attention_weights(q, k)
        sum_err = max(sum_err, float(np.abs(a.sum(axis=1) - 1.0).max()))
        shifted = attention_forward(q, k + rng.standard_normal((8, 1)), v)
        # adding one vector to every key shifts each score row by a constant
        shift_err = max(shift_err, float(np.abs(shifted - out).max()))
    checks.append(KernelCheck("attention forward vs extended precision", fwd_err, 1e-10))
    checks.append(KernelCheck("attention weight rows sum to 1", sum_err, 1e-12))
    checks.append(KernelCheck("attention invariant to per-row score shifts", shift_err, 1e-12))

    grad_err = 0.0
    for _ in range(20):
        q = rng.standard_normal((4, 5))
        k = rng.standard_normal((4, 5))
        v = rng.standard_normal((4, 5))
        upstream = rng.standard_normal((4, 5))
        grad_err = max(grad_err, _gradient_fd_error(q, k, v, upstream))
    checks.append(KernelCheck("attention gradients vs central differences", grad_err, 1e-5))

    depth = tuple(rng.standard_normal((8, 16)) for _ in range(3))
    event = tuple(rng.standard_normal((8, 16)) for _ in range(3))
    fused = bidirectional_fuse(depth, event)
    parts = attention_forward(depth[0], event[1], event[2]) + attention_forward(
        event[0], depth[1], depth[2]
    )
    checks.append(
        KernelCheck("bidirectional fusion adds both directions", float(np.abs(fused - parts).max()), 1e-15)
    )
    return checks
