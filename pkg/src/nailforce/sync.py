"""Video/force time-base alignment from the LED telegraph signals."""

from __future__ import annotations

from dataclasses import dataclass, replace as dc_replace

import numpy as np

from .core import InvalidInputError, NoSignalError, Trial


@dataclass(frozen=True)
class BinarySignal:
    samples: np.ndarray
    rate: float

    def __post_init__(self):
        s = np.asarray(self.samples)
        if self.rate <= 0:
            raise InvalidInputError("rate must be positive")
        if s.size and not np.all((s == 0) | (s == 1)):
            raise InvalidInputError("samples must be 0/1")
        object.__setattr__(self, "samples", s.astype(np.int8))

    @property
    def duration(self):
        return len(self.samples) / self.rate


def extract_led(frames, roi):
    """Threshold the mean ROI intensity of each frame into a 0/1 signal.

    roi is (row_lo, row_hi, col_lo, col_hi); the threshold is the
    midpoint between the 10th and 90th percentile of the per-frame means.
    """
    r0, r1, c0, c1 = roi
    if not frames:
        raise NoSignalError("no frames")
    frame0 = frames[0]
    if not (0 <= r0 < r1 <= frame0.height and 0 <= c0 < c1 <= frame0.width):
        raise InvalidInputError(f"roi {roi} outside frame {frame0.height}x{frame0.width}")
    means = np.array([f.data[r0:r1, c0:c1].mean() for f in frames])
    lo, hi = np.percentile(means, [10, 90])
    if hi - lo < 1e-6:
        raise NoSignalError("constant ROI intensity, no LED signal visible")
    threshold = 0.5 * (lo + hi)
    rate = 1.0
    times = np.array([f.timestamp for f in frames])
    if len(times) > 1:
        rate = (len(times) - 1) / (times[-1] - times[0])
    return BinarySignal((means > threshold).astype(int), rate=rate)


def resample(signal, target_rate):
    """Zero-order-hold resampling to target_rate (nearest input sample)."""
    if target_rate <= 0:
        raise InvalidInputError("target_rate must be positive")
    if target_rate == signal.rate:
        return BinarySignal(signal.samples.copy(), rate=signal.rate)
    n_out = int(round(signal.duration * target_rate))
    k = np.arange(n_out)
    idx = np.round(k * signal.rate / target_rate).astype(int)
    idx = np.clip(idx, 0, len(signal.samples) - 1)
    return BinarySignal(signal.samples[idx], rate=target_rate)


def _pearson(a, b):
    a = a - a.mean()
    b = b - b.mean()
    denom = np.sqrt((a * a).sum() * (b * b).sum())
    if denom == 0:
        return None
    return float((a * b).sum() / denom)


def find_offset(a, b, max_lag):
    """Best integer lag of b relative to a by normalized cross-correlation.

    Positive lag means b is a delayed by that many samples.  Signals must
    share a rate; correlation is computed over the overlap at each lag in
    [-max_lag, max_lag], ties broken toward the smallest |lag|.
    Returns (lag, score).
    """
    if a.rate != b.rate:
        raise InvalidInputError("resample the signals to a common rate first")
    sa = a.samples.astype(np.float64)
    sb = b.samples.astype(np.float64)
    if sa.min() == sa.max() or sb.min() == sb.max():
        raise NoSignalError("constant signal carries no timing information")
    best = None
    for lag in sorted(range(-int(max_lag), int(max_lag) + 1), key=lambda k: (abs(k), k)):
        # pair a[t] with b[t + lag]: b = a delayed by `lag` scores highest at `lag`
        if lag >= 0:
            ov_a, ov_b = sa, sb[lag:]
        else:
            ov_a, ov_b = sa[-lag:], sb
        n = min(len(ov_a), len(ov_b))
        if n < 2:
            continue
        score = _pearson(ov_a[:n], ov_b[:n])
        if score is None:
            continue
        if best is None or score > best[1] + 1e-12:
            best = (lag, score)
    if best is None:
        raise NoSignalError("no lag with a non-degenerate overlap")
    return best


def synchronize_trial(trial, max_lag_s=1.0):
    """Shift video timestamps onto the force clock and label each frame.

    Uses the stored LED sequences of both streams, correlates them at the
    video frame rate, applies the recovered offset to the frame
    timestamps, and attaches the linearly interpolated wrench at each
    corrected frame time.  Returns (trial, offset_seconds, labels) where
    labels is an (n_frames, 6) array.
    """
    if trial.led_video is None or trial.led_force is None:
        raise NoSignalError("trial has no LED logs")
    ft = trial.frame_times()
    wt = trial.wrench_times()
    frame_rate = (len(ft) - 1) / (ft[-1] - ft[0]) if len(ft) > 1 else 1.0
    force_rate = (len(wt) - 1) / (wt[-1] - wt[0]) if len(wt) > 1 else 1.0
    video_sig = BinarySignal(trial.led_video, rate=frame_rate)
    force_sig = resample(BinarySignal(trial.led_force, rate=force_rate), frame_rate)
    max_lag = max(1, int(round(max_lag_s * frame_rate)))
    # force stream = video stream delayed by `lag` frames, so the frame
    # clock lags the force clock by lag/frame_rate seconds
    lag, score = find_offset(video_sig, force_sig, max_lag)
    offset = lag / frame_rate
    corrected = ft + offset
    w = trial.wrench_matrix()
    labels = np.stack(
        [np.interp(corrected, wt, w[:, j]) for j in range(6)],
        axis=1,
    )
    synced = replace_frame_times(trial, corrected)
    return synced, offset, labels


def replace_frame_times(trial, new_times):
    """Copy of the trial with frames restamped to new_times."""
    frames = [dc_replace(f, timestamp=float(t)) for f, t in zip(trial.frames, new_times)]
    return Trial(
        participant=trial.participant,
        finger=trial.finger,
        weight_g=trial.weight_g,
        surface=trial.surface,
        frames=frames,
        wrenches=trial.wrenches,
        marker_angle_series=trial.marker_angle_series,
        reference_marker_angle=trial.reference_marker_angle,
        led_video=trial.led_video,
        led_force=trial.led_force,
        metadata=dict(trial.metadata),
    )
