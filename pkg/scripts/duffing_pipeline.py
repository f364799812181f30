"""Forced Duffing x'' + x^3 = 0.05 cos t: capture set, degree, periodic orbit.

    python3 scripts/duffing_pipeline.py [--nx 32] [--threads 4]
"""
import argparse
import math

from rotor.field_model import builtin_field
from rotor.integrator import IntegratorOptions, poincare_map
from rotor.rotation import Region, rotation_grid
from rotor.topology import build_capture_set, choose_n_bar, degree_fixed_point, find_periodic, find_periodic_in


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--nx", type=int, default=32)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    field = builtin_field("duffing", eps=0.05)
    region = Region(-3.0, 3.0, -3.0, 3.0)
    grid = rotation_grid(field, region, args.nx, args.nx, threads=args.threads)
    n_bar = choose_n_bar(field)
    cs = build_capture_set(field, n_bar, region, grid=grid, threads=args.threads)
    print(f"n_bar = {n_bar}, level {cs.level}, {len(cs.inner_component.vertices)} vertices, "
          f"area {cs.inner_component.area:.4f}")

    deg = degree_fixed_point(field, cs.inner_component, threads=args.threads)
    print(f"degree {deg.degree}, boundary rotation in [{deg.min_rotation_on_boundary:.4f}, "
          f"{deg.max_rotation_on_boundary:.4f}]")

    orbit = find_periodic_in(field, cs.inner_component, threads=args.threads)
    z = orbit.z_star
    end = poincare_map(field, z, IntegratorOptions().tightened(10)).z
    print(f"z* = ({z.x:.12f}, {z.y:.3e}), residual {orbit.residual:.2e}, "
          f"re-integrated {math.hypot(end.x - z.x, end.y - z.y):.2e}, rho {orbit.rho:.6f}")

    seeded = find_periodic(field, (-0.05, 0.0))
    print(f"Newton from the harmonic-balance seed lands {math.hypot(seeded.z_star.x - z.x, seeded.z_star.y - z.y):.2e} away")
    worst = max(abs(orbit.x(2 * math.pi * i / 64) + 0.05 * math.cos(2 * math.pi * i / 64)) for i in range(64))
    print(f"max |x(t) + 0.05 cos t| along the orbit: {worst:.2e}")


if __name__ == "__main__":
    main()
