"""Calibrated ultrasound-first selective imaging policy engine.

Derives clinical hip measurements from raw annotations, fits one-sided
conformal lower bounds on ultrasound predictions, evaluates threshold
deferral rules over policy grids on strictly matched US-XR pairs, and
emits coverage/miss/utilization surfaces and decision-curve envelopes.
"""

__version__ = "0.1.0"
