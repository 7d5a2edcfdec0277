"""Plant local units with known knots and watch the analyzer find them.

Run: python3 demos/planted_analysis.py
"""

import numpy as np

from splinenet.analyzer import analyze
from splinenet.polyspline import KnotSet1D, Poly1D, Spline1D
from splinenet.synth import synthesize_spline_1d
from splinenet.trainer import Dataset

spline = Spline1D(KnotSet1D([0.3, 0.55, 0.8]), Poly1D([0.5, -1.0, 0.4]), [6.0, -4.0, 3.0], 2)
net = synthesize_spline_1d(spline, tol=1e-9, refine=False, deltas=[0.5], rho_caps=[1024.0]).net
x = np.linspace(0, 1, 101)
report = analyze(net, Dataset(x, net(x)))

print(f"network of {net.theta} units, solution mode: {report.mode.value}")
for u in report.units:
    z = "" if u.zero_error is None else f"  z = {u.zero_error:.2f}"
    print(f"  unit {u.index}: {u.verdict.value}{z}")
print("planted knots:", spline.knots.knots)
