"""Verify the hybrid and uniform inverters under both inputs and plot the tubes."""

import os

from reachverify import builtin_problem, verify
from reachverify import plot

OUT = os.path.join(os.path.dirname(os.path.abspath(__file__)), "out")


def main():
    os.makedirs(OUT, exist_ok=True)
    for name in ("inv-hybrid", "inv-uniform"):
        for kind in ("ramp", "sig"):
            pb = builtin_problem(name, kind)
            res = verify(pb)
            print(f"{pb.name:18s} {res.verdict.value:16s} triples={res.stats['triples']}")
            path = os.path.join(OUT, f"{pb.name}.svg")
            plot.save(plot.tubes_svg(res.tubes, 0, pb.name, 1.32, pb.plant.state_names), path)
    print(f"plots in {OUT}")


if __name__ == "__main__":
    main()
