"""Fed-back OR gate: bisect the critical pulse width and show two nearby starts splitting."""

import os

import numpy as np

from reachverify import plot, point_simulate
from reachverify.circuits import VERIFY_CM, CircuitSpec, build_or_feedback

OUT = os.path.join(os.path.dirname(os.path.abspath(__file__)), "out")
T = 40.0
VDD = 1.2


def final_vout(width, vout0, full=False):
    aut, pulse = build_or_feedback(CircuitSpec(C_M=VERIFY_CM), width=width)
    sig = pulse.signal(T, 0.01)
    tr = point_simulate(aut, [VDD, VDD, vout0], T, 0.05, None, sig)
    return tr if full else tr.states[2, -1]


def main():
    os.makedirs(OUT, exist_ok=True)
    lo, hi = 0.0, 3.0
    for _ in range(30):
        mid = 0.5 * (lo + hi)
        if final_vout(mid, 0.0005) > VDD / 2:
            hi = mid
        else:
            lo = mid
    width = 0.5 * (lo + hi)
    print(f"critical pulse width {width:.9f}")
    overlays = []
    for v0 in (0.0, 0.001):
        tr = final_vout(width, v0, full=True)
        print(f"V_out(0) = {v0:.3f} V  ->  V_out({T:g}) = {tr.states[2, -1]:.4f} V")
        overlays.append((tr.times, tr.states[2]))
    ts = overlays[0][0]
    svg = plot.boxes_svg([0.0], [T], np.array([[0.0, 0.0, 0.0]]), np.array([[0.0, 0.0, 0.0]]), ["-"], 2,
                         title=f"fed-back OR, pulse width {width:.6f}", ylabel="Vout", overlays=overlays)
    plot.save(svg, os.path.join(OUT, "metastability.svg"))
    print(f"plot in {OUT} ({ts.size} samples)")


if __name__ == "__main__":
    main()
