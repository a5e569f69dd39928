"""Fingertip force, torque and contact-curvature estimation from nail images."""

__version__ = "0.1.0"
