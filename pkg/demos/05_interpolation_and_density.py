"""
Filling in the surface between and beyond the slices
====================================================

Between calibrated expiries, call prices at fixed log-moneyness are mixed
with a weight that depends on the ATM variance. Before the first expiry the
intrinsic value stands in for a slice at t = 0, and past the last expiry an
SSVI refit of the final slice is shifted up with the ATM variance.
"""

import numpy as np
from scipy import integrate

from svi_surface import BoundedPowerLaw, SsviSurface, ThetaCurve, build_surface, density, price, query

truth = SsviSurface(-0.6, BoundedPowerLaw(1.2, 0.5), ThetaCurve((1.0,), (0.04,)))
times = (0.25, 0.5, 1.0, 1.5, 2.0)
surface = build_surface(times, [truth.slice(t) for t in times])

print("  t     region   vol(k=0)  vol(k=0.2)  true vol(k=0.2)")
for t in (0.1, 0.25, 0.75, 1.25, 2.0, 4.0):
    region = "short" if t < times[0] else "long" if t > times[-1] else "interp"
    v0 = query(0.0, t, surface).vol
    v2 = query(0.2, t, surface).vol
    print(f"{t:4.2f}  {region:7s}  {v0:.5f}   {v2:.5f}     {np.sqrt(truth.w(0.2, t) / t):.5f}")

# Prices rise with expiry at every strike.
k = np.linspace(-1, 1, 41)
ladder = np.geomspace(0.05, 6.0, 25)
steps = np.diff([price(k, t, surface) for t in ladder], axis=0)
print(f"\nsmallest price increase along the t ladder: {steps.min():.2e}")

# The density of ln(S/F) integrates to one. Before the first expiry part of
# the mass sits at k = 0 (the intrinsic leg), so the continuous part falls short by alpha.
for t in (0.1, 0.75, 4.0):
    mass = integrate.quad(lambda x: float(density(x, t, surface)), -8, 8, limit=200)[0]
    atom = surface.mixing_weight(t, -1) if t < times[0] else 0.0
    print(f"t={t:4.2f}: continuous mass {mass:.6f} + point mass {atom:.6f} = {mass + atom:.6f}")
