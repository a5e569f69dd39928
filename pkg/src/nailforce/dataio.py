"""Trial directory layout: portable gray/pixmap frames plus CSV logs.

One directory per trial:
    frame_000000.pgm|.ppm ...   16-bit binary netpbm, intensity = value/65535
    wrench.csv                  timestamp,fx,fy,fz,tx,ty,tz
    led_video.csv               timestamp,state
    led_force.csv               timestamp,state
    marker_angles.csv           timestamp,theta_deg
    meta                        key=value lines (participant, finger, weight_g,
                                surface_id, c1, c2, theta_r_deg, gt_* extras)
"""

from __future__ import annotations

import csv
import os
import re

import numpy as np

from .core import ImageFrame, InvalidInputError, SurfaceSpec, Trial, Wrench, surface_catalog

_MAXVAL = 65535


def write_netpbm(path, image):
    """Write an (H,W) or (H,W,3) float array in [0,1] as 16-bit P5/P6."""
    a = np.asarray(image, dtype=np.float64)
    if a.ndim == 3 and a.shape[2] == 1:
        a = a[:, :, 0]
    q = np.round(np.clip(a, 0.0, 1.0) * _MAXVAL).astype(">u2")
    if a.ndim == 2:
        magic, h, w = b"P5", a.shape[0], a.shape[1]
    elif a.ndim == 3 and a.shape[2] == 3:
        magic, h, w = b"P6", a.shape[0], a.shape[1]
    else:
        raise InvalidInputError(f"unsupported image shape {a.shape}")
    with open(path, "wb") as fh:
        fh.write(magic + b"\n%d %d\n%d\n" % (w, h, _MAXVAL))
        fh.write(q.tobytes())


def read_netpbm(path):
    """Read a binary P5/P6 file back to a float array in [0,1]."""
    with open(path, "rb") as fh:
        data = fh.read()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        m = re.match(rb"\s*(#[^\n]*\n|\S+)", data[pos:])
        if m is None:
            raise InvalidInputError(f"truncated netpbm header in {path}")
        pos += m.end()
        tok = m.group(1)
        if not tok.startswith(b"#"):
            tokens.append(tok)
    magic, w, h, maxval = tokens[0], int(tokens[1]), int(tokens[2]), int(tokens[3])
    channels = {b"P5": 1, b"P6": 3}.get(magic)
    if channels is None:
        raise InvalidInputError(f"unsupported netpbm magic {magic!r} in {path}")
    dtype = ">u2" if maxval > 255 else "u1"
    count = w * h * channels
    # exactly one whitespace byte separates maxval from the pixel data
    raw = np.frombuffer(data, dtype=dtype, count=count, offset=pos + 1)
    a = raw.astype(np.float64).reshape(h, w, channels) / maxval
    return a[:, :, 0] if channels == 1 else a


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _read_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(x) for x in row] for row in reader if row]
    return header, np.array(rows) if rows else np.zeros((0, len(header)))


def write_trial(trial, directory):
    """Persist a trial in the standard directory layout."""
    os.makedirs(directory, exist_ok=True)
    for i, frame in enumerate(trial.frames):
        ext = "pgm" if frame.channels == 1 else "ppm"
        img = frame.data[:, :, 0] if frame.channels == 1 else frame.data
        write_netpbm(os.path.join(directory, f"frame_{i:06d}.{ext}"), img)
    _write_csv(
        os.path.join(directory, "wrench.csv"),
        ["timestamp", "fx", "fy", "fz", "tx", "ty", "tz"],
        [[repr(w.timestamp)] + [repr(v) for v in w.as_vector()] for w in trial.wrenches],
    )
    ft = trial.frame_times()
    _write_csv(
        os.path.join(directory, "led_video.csv"),
        ["timestamp", "state"],
        [[repr(float(t)), int(s)] for t, s in zip(ft, trial.led_video)],
    )
    wt = trial.wrench_times()
    _write_csv(
        os.path.join(directory, "led_force.csv"),
        ["timestamp", "state"],
        [[repr(float(t)), int(s)] for t, s in zip(wt, trial.led_force)],
    )
    _write_csv(
        os.path.join(directory, "marker_angles.csv"),
        ["timestamp", "theta_deg"],
        [[repr(float(t)), repr(float(a))] for t, a in zip(ft, trial.marker_angle_series)],
    )
    meta = {
        "participant": trial.participant,
        "finger": trial.finger,
        "weight_g": trial.weight_g,
        "surface_id": trial.surface.id,
        "c1": repr(trial.surface.c1),
        "c2": repr(trial.surface.c2),
        "theta_r_deg": repr(trial.reference_marker_angle),
    }
    for key, value in sorted(trial.metadata.items()):
        meta[key] = _encode_meta_value(value)
    with open(os.path.join(directory, "meta"), "w") as fh:
        for key, value in meta.items():
            fh.write(f"{key}={value}\n")


def _encode_meta_value(value):
    if isinstance(value, np.ndarray):
        return " ".join(repr(float(v)) for v in value.reshape(-1))
    if isinstance(value, (list, tuple)):
        return " ".join(repr(float(v)) for v in value)
    return repr(value) if isinstance(value, float) else str(value)


def read_meta(directory):
    meta = {}
    with open(os.path.join(directory, "meta")) as fh:
        for line in fh:
            line = line.strip()
            if line and "=" in line:
                key, value = line.split("=", 1)
                meta[key] = value
    return meta


def read_trial(directory, load_frames=True, frame_indices=None):
    """Load a trial directory.

    frame_indices restricts which frames are decoded (None = all); the
    LED/marker rows are always loaded in full so synchronization can use
    them even when frames are subsampled.
    """
    meta = read_meta(directory)
    surface_id = int(meta["surface_id"])
    cat = surface_catalog()
    if surface_id in cat and abs(cat[surface_id].c1 - float(meta["c1"])) < 1e-9:
        surface = cat[surface_id]
    else:
        surface = SurfaceSpec(id=surface_id, c1=float(meta["c1"]), c2=float(meta["c2"]))

    _, wrench_rows = _read_csv(os.path.join(directory, "wrench.csv"))
    wrenches = [Wrench(f=row[1:4], tau=row[4:7], timestamp=row[0]) for row in wrench_rows]
    _, led_video = _read_csv(os.path.join(directory, "led_video.csv"))
    _, led_force = _read_csv(os.path.join(directory, "led_force.csv"))
    _, marker = _read_csv(os.path.join(directory, "marker_angles.csv"))

    frame_files = sorted(
        f for f in os.listdir(directory) if re.match(r"frame_\d{6}\.(pgm|ppm)$", f)
    )
    frame_times = led_video[:, 0]
    frames = []
    kept = range(len(frame_files)) if frame_indices is None else frame_indices
    kept = [i for i in kept if 0 <= i < len(frame_files)]
    if load_frames:
        for i in kept:
            img = read_netpbm(os.path.join(directory, frame_files[i]))
            frames.append(ImageFrame(img, timestamp=float(frame_times[i])))

    metadata = {k: v for k, v in meta.items() if k.startswith("gt_") or k == "session"}
    metadata["directory"] = directory
    if frame_indices is not None:
        metadata["frame_indices"] = list(kept)

    angles = marker[:, 1] if marker.size else np.zeros(len(frame_files))
    trial = Trial(
        participant=int(meta["participant"]),
        finger=meta["finger"],
        weight_g=int(meta["weight_g"]),
        surface=surface,
        frames=frames,
        wrenches=wrenches,
        marker_angle_series=angles[list(kept)] if load_frames else angles,
        reference_marker_angle=float(meta["theta_r_deg"]),
        led_video=led_video[:, 1].astype(int),
        led_force=led_force[:, 1].astype(int),
        metadata=metadata,
    )
    return trial


def trial_directories(root):
    """Sorted trial subdirectories under a dataset root."""
    return sorted(
        os.path.join(root, d)
        for d in os.listdir(root)
        if os.path.isdir(os.path.join(root, d)) and os.path.exists(os.path.join(root, d, "meta"))
    )


def parse_meta_floats(meta, key):
    """Decode a whitespace-joined float list written by write_trial."""
    return np.array([float(tok) for tok in meta[key].split()])
