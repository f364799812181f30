"""Periodic orbits of x'' + x^3 + 0.05 cos(t) x = 0 winding k times per period.

    python3 scripts/multiplicity_demo.py [--k 1 2 3 4]
"""
import argparse

from rotor.field_model import expression_field
from rotor.topology import find_periodic, multiplicity_search


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--k", type=int, nargs="+", default=[1, 2, 3])
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    field = expression_field("x^3 + 0.05*cos(t)*x", label="cubic_mathieu")
    base = find_periodic(field, (0.0, 0.0))
    print(f"base orbit z* = ({base.z_star.x:.3e}, {base.z_star.y:.3e})")
    res = multiplicity_search(field, base, args.k, threads=args.threads)
    for k in args.k:
        for o in res.by_k.get(k, []):
            print(f"k={k}: z* = ({o.z_star.x:+.8f}, {o.z_star.y:+.8f}) rho {o.rho:.6f} residual {o.residual:.1e}")
    if res.not_found:
        print("not found:", res.not_found)


if __name__ == "__main__":
    main()
