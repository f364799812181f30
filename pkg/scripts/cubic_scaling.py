"""Rotation of x'' + x^3 = 0 over [0, 2 pi] from (A, 0) against 2 pi A / T1.

The ratio tends to 1 only on average: over a fixed window the count depends on
where the last partial turn ends, so the printed relative gap oscillates.
"""
import math

import numpy as np
from scipy.integrate import quad

from rotor.field_model import expression_field
from rotor.rotation import rotation

T1 = 4 * math.sqrt(2) * quad(lambda p: 1 / math.sqrt(1 + math.sin(p) ** 2), 0, math.pi / 2, epsabs=1e-14)[0]


def main():
    field = expression_field("x^3")
    print(f"T1 = {T1:.12f}")
    print(f"{'A':>6} {'rho':>10} {'2piA/T1':>10} {'rel gap':>9}")
    for A in np.linspace(1.0, 20.0, 39):
        rho = rotation(field, 0.0, 2 * math.pi, (float(A), 0.0)).rho
        ref = 2 * math.pi * A / T1
        print(f"{A:6.2f} {rho:10.5f} {ref:10.5f} {abs(rho - ref) / ref:9.4%}")


if __name__ == "__main__":
    main()
