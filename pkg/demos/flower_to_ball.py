"""Evolve a five-petal flower and print how it rounds up.

Usage: python3 demos/flower_to_ball.py [--delta 0.05] [--T 1.0] [--out runs/demo_flower]
"""
import argparse

import numpy as np

from starflow import flow
from starflow import starset as ss
from starflow.flow import FlowParams


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--delta", type=float, default=0.05)
    ap.add_argument("--T", type=float, default=1.0)
    ap.add_argument("--h", type=float, default=2e-3)
    ap.add_argument("--out", default=None)
    args = ap.parse_args()

    E0 = ss.rescale_to_volume(ss.flower(M=256))
    p = FlowParams(delta=args.delta, h=args.h, r0=0.3, R0=2.5, rho=0.3, T=args.T, M=256,
                   enforce_admissible_bounds=False)
    every = max(1, p.n_steps // 10)

    def progress(k, tr):
        if k % every == 0:
            S = tr.sets[-1]
            print(f"t={k * p.h:6.3f}  area={tr.volume[-1]:.5f}  perimeter={tr.perimeter[-1]:.5f}  "
                  f"radius spread={np.ptp(S.radii):.2e}  lambda={tr.lam[-1]:.4f}")

    tr = flow.run_flow(E0, p, progress=progress)
    V = flow.equilibrium_volume(p.delta)
    print(f"stationary area {V:.6f}, stationary perimeter {2 * np.sqrt(np.pi * V):.6f}")
    if args.out:
        tr.save(args.out, svg=True)
        print(f"trace written to {args.out}")


if __name__ == "__main__":
    main()
