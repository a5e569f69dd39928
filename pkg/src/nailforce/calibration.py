"""Sensor-to-fingertip wrench calibration.

The object is static with respect to the finger contact, so the torque
difference between the sensor reference and the contact point is
    dtx = fz*y - fy*z,   dty = -fz*x + fx*z,   dtz = -fx*y + fy*x
with (x, y, z) the contact position in sensor coordinates (mm).  The
fingertip torque is tau' = tau - dt.  Contact position is recovered from
early-contact samples (tau' ~ 0 there) constrained to the known surface
z = h(x, y).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import IllConditionedError, NoConsistentContactError

MIN_SOLVE_FZ = 0.2  # N; below this the contact equations are ill-conditioned
ONSET_FZ = 0.1  # N; sustained grip force marking contact onset
ONSET_SUSTAIN_S = 0.05
EARLY_WINDOW = 5  # samples averaged for the tau' ~ 0 assumption


@dataclass(frozen=True)
class ContactPoint:
    x: float
    y: float
    z: float

    def as_array(self):
        return np.array([self.x, self.y, self.z])


@dataclass(frozen=True)
class CalibratedWrench:
    f: np.ndarray
    tau_prime: np.ndarray
    timestamp: float = 0.0


def torque_shift(f, p):
    """Torque offset dt between sensor reference and contact point p."""
    fx, fy, fz = np.asarray(f, dtype=np.float64).reshape(3)
    if isinstance(p, ContactPoint):
        x, y, z = p.x, p.y, p.z
    else:
        x, y, z = np.asarray(p, dtype=np.float64).reshape(3)
    return np.array([fz * y - fy * z, -fz * x + fx * z, -fx * y + fy * x])


def _residual(xy, f, dtau, surface):
    x, y = xy
    z = float(surface.height(x, y))
    return dtau - torque_shift(f, (x, y, z))


def _jacobian(xy, f, surface):
    """d(residual)/d(x, y) with z = h(x, y) substituted."""
    x, y = xy
    fx, fy, fz = f
    hx, hy = surface.height_gradient(x, y)
    # residual = dtau - (fz*y - fy*z, -fz*x + fx*z, -fx*y + fy*x)
    return -np.array(
        [
            [-fy * hx, fz - fy * hy],
            [-fz + fx * hx, fx * hy],
            [-fy, fx],
        ]
    )


def solve_contact(f, dtau, surface, tol=1e-9, max_iter=100, search_radius=None):
    """Contact point on z = h(x, y) consistent with the torque offset.

    Flat surfaces use the closed-form linear inversion; curved surfaces
    run Gauss-Newton on (x, y) with a grid-search fallback.
    """
    f = np.asarray(f, dtype=np.float64).reshape(3)
    dtau = np.asarray(dtau, dtype=np.float64).reshape(3)
    fx, fy, fz = f
    if abs(fz) < MIN_SOLVE_FZ:
        raise IllConditionedError(f"|fz| = {abs(fz):.3g} N below {MIN_SOLVE_FZ} N")

    if surface.shape == "flat":
        y = dtau[0] / fz
        x = -dtau[1] / fz
        point = ContactPoint(float(x), float(y), 0.0)
        residual = dtau - torque_shift(f, point)
        if abs(residual[2]) > max(1e-6, 1e-6 * np.abs(dtau).max()):
            raise NoConsistentContactError(
                f"dtz inconsistent with planar contact by {residual[2]:.3g} N*mm"
            )
        return point

    r_max = search_radius
    if r_max is None:
        r_max = min(20.0, 0.8 * surface.radius_mm) if math.isfinite(surface.radius_mm) else 20.0

    xy = np.array([-dtau[1] / fz, dtau[0] / fz])  # planar guess
    xy = np.clip(xy, -r_max, r_max)
    best = _gauss_newton(xy, f, dtau, surface, tol, max_iter)
    if best is None or np.linalg.norm(_residual(best, f, dtau, surface)) > 1e-6:
        xy0 = _grid_search(f, dtau, surface, r_max)
        refined = _gauss_newton(xy0, f, dtau, surface, tol, max_iter)
        best = refined if refined is not None else xy0
    res = np.linalg.norm(_residual(best, f, dtau, surface))
    if res > max(1e-6, 1e-9 * np.abs(dtau).max()):
        raise NoConsistentContactError(f"contact residual {res:.3g} N*mm above tolerance")
    x, y = best
    return ContactPoint(float(x), float(y), float(surface.height(x, y)))


def _gauss_newton(xy, f, dtau, surface, tol, max_iter):
    xy = xy.astype(np.float64).copy()
    lam = 1e-12
    for _ in range(max_iter):
        r = _residual(xy, f, dtau, surface)
        if np.linalg.norm(r) < tol:
            return xy
        J = _jacobian(xy, f, surface)
        A = J.T @ J + lam * np.eye(2)
        try:
            step = np.linalg.solve(A, -J.T @ r)
        except np.linalg.LinAlgError:
            return None
        new = xy + step
        if np.linalg.norm(_residual(new, f, dtau, surface)) <= np.linalg.norm(r):
            xy = new
            lam = max(lam * 0.5, 1e-12)
        else:
            lam = lam * 10 + 1e-9
            if lam > 1e6:
                return None
    return xy


def _grid_search(f, dtau, surface, r_max, n=121):
    xs = np.linspace(-r_max, r_max, n)
    ys = np.linspace(-r_max, r_max, n)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    gz = surface.height(gx, gy)
    fx, fy, fz = f
    rx = dtau[0] - (fz * gy - fy * gz)
    ry = dtau[1] - (-fz * gx + fx * gz)
    rz = dtau[2] - (-fx * gy + fy * gx)
    cost = rx * rx + ry * ry + rz * rz
    i, j = np.unravel_index(np.argmin(cost), cost.shape)
    return np.array([xs[i], ys[j]])


def calibrate_torques(wrenches, contact):
    """Fingertip torques tau' = tau - dt(f, contact) per sample."""
    out = []
    for w in wrenches:
        out.append(
            CalibratedWrench(
                f=w.f.copy(),
                tau_prime=w.tau - torque_shift(w.f, contact),
                timestamp=w.timestamp,
            )
        )
    return out


def estimate_contact(wrenches, surface):
    """Solve the contact point from the first samples after contact onset.

    Onset is the first sample whose fz exceeds ONSET_FZ sustained for
    ONSET_SUSTAIN_S; the first EARLY_WINDOW samples with |f| above
    MIN_SOLVE_FZ after onset are averaged before solving.
    """
    times = np.array([w.timestamp for w in wrenches])
    fz = np.array([w.f[2] for w in wrenches])
    onset = None
    for i in range(len(wrenches)):
        if fz[i] > ONSET_FZ:
            horizon = times[i] + ONSET_SUSTAIN_S
            window = (times >= times[i]) & (times <= horizon)
            if np.all(fz[window] > ONSET_FZ):
                onset = i
                break
    if onset is None:
        raise NoConsistentContactError("no contact onset found")
    picked = []
    for w in wrenches[onset:]:
        if np.linalg.norm(w.f) > MIN_SOLVE_FZ:
            picked.append(w)
        if len(picked) == EARLY_WINDOW:
            break
    if not picked:
        raise NoConsistentContactError("no samples above the force threshold after onset")
    f_avg = np.mean([w.f for w in picked], axis=0)
    tau_avg = np.mean([w.tau for w in picked], axis=0)
    # tau' ~ 0 at onset, so dt ~ tau
    return solve_contact(f_avg, tau_avg, surface)


def rotate_forces(f, theta_deg, theta_r_deg):
    """Rotate (fx, fy) counter-clockwise (seen from +z) by theta - theta_r."""
    f = np.asarray(f, dtype=np.float64).reshape(3)
    a = math.radians(theta_deg - theta_r_deg)
    c, s = math.cos(a), math.sin(a)
    return np.array([c * f[0] - s * f[1], s * f[0] + c * f[1], f[2]])


def marker_angle_search(predictions, truths, angles=None):
    """Mount-angle offset minimizing prediction/rotated-truth mismatch.

    predictions and truths are (n, >=2) arrays whose first two columns
    are (fx, fy).  Scans integer degrees in [-20, 20]; ties break toward
    the smallest |angle|.  Returns the best angle in degrees.
    """
    predictions = np.asarray(predictions, dtype=np.float64)
    truths = np.asarray(truths, dtype=np.float64)
    if angles is None:
        angles = range(-20, 21)
    best_angle, best_rmse = None, None
    for a in sorted(angles, key=lambda v: (abs(v), v)):
        rad = math.radians(a)
        c, s = math.cos(rad), math.sin(rad)
        rx = c * truths[:, 0] - s * truths[:, 1]
        ry = s * truths[:, 0] + c * truths[:, 1]
        rmse = math.sqrt(
            np.mean((predictions[:, 0] - rx) ** 2 + (predictions[:, 1] - ry) ** 2)
        )
        if best_rmse is None or rmse < best_rmse - 1e-12:
            best_angle, best_rmse = a, rmse
    return best_angle
