"""Sign and convention choices where commonly printed forms disagree.

Each entry names the quantity, the form implemented here and the check
that decides it. ``plan`` copies these into ``errata-notes.txt`` so every
mission bundle records the conventions it was produced under.
"""

from dataclasses import dataclass


@dataclass(frozen=True)
class Erratum:
    topic: str
    adopted: str
    check: str


ERRATA = (
    Erratum(
        "Euler rotation order",
        "C_bn = Rz(yaw) Ry(pitch) Rx(roll), body FRD to navigation NED",
        "aerospace yaw-pitch-roll sequence; Euler to DCM to Euler round trips",
    ),
    Erratum(
        "DCM entry (2,2)",
        "cos(roll)cos(yaw) + sin(roll)sin(pitch)sin(yaw)",
        "matrix product Rz Ry Rx; a lone cos(roll) factor breaks orthogonality",
    ),
    Erratum(
        "Quaternion kinematics matrix rows 2 and 4",
        "[e0, -e3, e2] and [-e2, e1, e0], i.e. q_dot = q * (0, w) / 2",
        "Euler, DCM and quaternion propagation of one rate profile agree within 0.05 deg",
    ),
    Erratum(
        "Tilt-compensated heading",
        "sequential de-rotation: Yh = My cos(roll) - Mz sin(roll), "
        "Xh = Mx cos(pitch) + (My sin(roll) + Mz cos(roll)) sin(pitch)",
        "heading agrees with the TRIAD yaw on tilted, noise-free fields",
    ),
    Erratum(
        "TRIAD output direction",
        "C_bn = sum_i r_i b_i^T (reference triad times body triad transposed)",
        "a_B = R^T a_R and m_B = R^T m_R recover R to 1e-9 rad",
    ),
    Erratum(
        "Transition matrix bias block",
        "A[:4, 4:] = -dt/2 Xi(q), B[:4] = dt/2 Xi(q)",
        "A x + B u equals one quaternion-integration step with rate u - b",
    ),
)


def errata_text():
    lines = ["Implementation conventions", ""]
    for e in ERRATA:
        lines.append(f"- {e.topic}: {e.adopted}")
        lines.append(f"  decided by: {e.check}")
    return "\n".join(lines) + "\n"
