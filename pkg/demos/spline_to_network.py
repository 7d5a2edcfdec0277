"""Turn a smooth target into a cubic spline, then into a network that implements it.

Run: python3 demos/spline_to_network.py
"""

import numpy as np

from splinenet.activation import TANH
from splinenet.polyspline import KnotSet1D, construct_spline_from_derivative
from splinenet.synth import add_negative_unit, synthesize_spline_1d

f = lambda x: np.sin(3 * x)
spline = construct_spline_from_derivative(f, 3, KnotSet1D.uniform(5))
print(f"cubic spline with {spline.zeta} pieces, knots {np.round(spline.knots.knots, 3)}")

out = synthesize_spline_1d(spline)
print(f"logistic network: {out.net.theta} units, L2 error to the spline {out.final_error:.2e}")
for rep in out.knot_reports:
    print(f"  knot {rep.knot:.2f}: sharpened with rho={rep.rho:g}, c_k={rep.c_k:.3f}")

# The tanh build needs one more unit to cancel the constant offset tanh carries.
t = synthesize_spline_1d(spline, TANH)
print(f"tanh network: {t.net.theta} units, L2 error {t.final_error:.2e}")

# A mirrored unit at a knot can be added without changing the function.
two_sided = add_negative_unit(out.net, 0.4, 0.7, spline.knots, 3)
x = np.linspace(0, 1, 2001)
print(f"after a negative unit at 0.4: max change {np.abs(two_sided(x) - out.net(x)).max():.1e}")
