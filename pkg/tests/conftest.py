import math

import pytest

from hipgate.calibration import AffineCorrection, Calibrator, ConformalRadius
from hipgate.geometry import Line2D


@pytest.fixture
def horizontal():
    return Line2D((0.0, 0.0), (100.0, 0.0))


def line_at(degrees: float, origin=(0.0, 0.0), length: float = 100.0) -> Line2D:
    """Line from origin at the given angle to the image x-axis."""
    rad = math.radians(degrees)
    return Line2D(
        origin, (origin[0] + length * math.cos(rad), origin[1] + length * math.sin(rad))
    )


def make_calibrators(q_alpha=0.0, q_cov=0.0, a=1.0, b=0.0, rho=0.10):
    """Identity-correction calibrators with chosen conformal radii."""

    def one(target, q):
        return Calibrator(
            correction=AffineCorrection(target=target, a=a, b=b, n_fit=10),
            radius=ConformalRadius(target=target, rho=rho, q_plus=q, n_cal=10),
        )

    return {"alpha": one("alpha", q_alpha), "coverage": one("coverage", q_cov)}
