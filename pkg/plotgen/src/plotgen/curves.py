"""Parsing of force-displacement curve files.

The expected schema is the fixed CSV contract of the simulation tool::

    step,u_x,u_x_over_l,F_x,F_x_normalized,newton_iters,branch

Anything else is rejected; numeric fields must be finite.
"""

import os
from dataclasses import dataclass

import numpy as np

EXPECTED_HEADER = "step,u_x,u_x_over_l,F_x,F_x_normalized,newton_iters,branch"


class SchemaError(ValueError):
    pass


@dataclass
class CurveFile:
    path: str
    step: np.ndarray
    u_x: np.ndarray
    u_x_over_l: np.ndarray
    f_x: np.ndarray
    f_x_normalized: np.ndarray
    newton_iters: np.ndarray
    branch: list

    @property
    def label(self):
        return os.path.splitext(os.path.basename(self.path))[0]

    def extrema(self, column="f_x_normalized"):
        """Independent scan of the parsed records: (u_at_max, max, u_at_min, min)."""
        values = getattr(self, column)
        k_max = int(np.argmax(values))
        k_min = int(np.argmin(values))
        return (
            float(self.u_x_over_l[k_max]),
            float(values[k_max]),
            float(self.u_x_over_l[k_min]),
            float(values[k_min]),
        )


def load_curve(path):
    with open(path) as fp:
        header = fp.readline().strip()
        if header != EXPECTED_HEADER:
            raise SchemaError(
                f"{path}: header '{header}' does not match '{EXPECTED_HEADER}'"
            )
        rows = [line.strip().split(",") for line in fp if line.strip()]
    if not rows:
        raise SchemaError(f"{path}: no records")
    if any(len(r) != 7 for r in rows):
        raise SchemaError(f"{path}: malformed record")
    curve = CurveFile(
        path=str(path),
        step=np.array([int(r[0]) for r in rows]),
        u_x=np.array([float(r[1]) for r in rows]),
        u_x_over_l=np.array([float(r[2]) for r in rows]),
        f_x=np.array([float(r[3]) for r in rows]),
        f_x_normalized=np.array([float(r[4]) for r in rows]),
        newton_iters=np.array([int(r[5]) for r in rows]),
        branch=[r[6] for r in rows],
    )
    for name in ("u_x", "u_x_over_l", "f_x", "f_x_normalized"):
        if not np.isfinite(getattr(curve, name)).all():
            raise SchemaError(f"{path}: non-finite values in column {name}")
    return curve
