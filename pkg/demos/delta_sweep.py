"""Multiplier size and trace spacing as the penalty parameter shrinks.

Usage: python3 demos/delta_sweep.py [--T 0.5]
"""
import argparse

from starflow import flow
from starflow import starset as ss
from starflow.flow import FlowParams


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--T", type=float, default=0.5)
    ap.add_argument("--h", type=float, default=2e-3)
    args = ap.parse_args()

    E0 = ss.rescale_to_volume(ss.flower(M=256))
    traces = []
    for delta in (0.1, 0.05, 0.025):
        p = FlowParams(delta=delta, h=args.h, r0=0.3, R0=2.5, rho=0.3, T=args.T, M=256,
                       enforce_admissible_bounds=False)
        traces.append(flow.run_flow(E0, p))
    print("delta,lambda_l2,sup_dH_next")
    for i, tr in enumerate(traces):
        nxt = traces[i + 1] if i + 1 < len(traces) else None
        gap = float("nan") if nxt is None else max(
            ss.hausdorff_distance(a, b) for a, b in zip(tr.sets, nxt.sets)
        )
        print(f"{tr.params.delta},{flow.lambda_l2(tr):.6f},{gap:.6f}")


if __name__ == "__main__":
    main()
