"""
When is an SSVI surface free of static arbitrage?
=================================================

SSVI fixes the shape of every slice by the ATM total variance theta and a
curvature function phi(theta). Simple inequalities on theta*phi decide whether
the whole surface is arbitrage-free. Here we test three curvature families.
"""

import numpy as np

from svi_surface import (
    BoundedPowerLaw,
    HestonLike,
    PowerLaw,
    SsviSurface,
    ThetaCurve,
    atm_skew,
    check_butterfly_conditions,
    check_static,
    ssvi_to_jw,
)

theta = ThetaCurve.from_vol(0.2)  # theta_t = 0.04 t
rho = -0.7
grid = np.geomspace(1e-4, 1e4, 400)

# Heston-like curvature needs lambda >= (1 + |rho|)/4 to stay butterfly-free
# at large theta.
crit = (1 + abs(rho)) / 4
for mult in (0.9, 1.1):
    rep = check_butterfly_conditions(SsviSurface(rho, HestonLike(mult * crit), theta), grid)
    where = "" if rep.passed else f", first violation at theta={rep.first_violation_theta:.3g}"
    print(f"heston-like lambda={mult:.1f}x critical: passed={rep.passed}{where}")

# A power law with gamma < 1/2 only works up to some expiry; the checker
# reports how far.
rep = check_static(SsviSurface(-0.6, PowerLaw(1.0, 0.3), theta), grid)
print(f"\npower law gamma=0.3: passed={rep.passed}, valid up to t={rep.valid_t_max:.2f} years")

# The bounded power law with eta (1 + |rho|) <= 2 passes everywhere.
rep = check_static(SsviSurface(-0.6, BoundedPowerLaw(1.2, 0.5), theta), grid)
print(f"bounded power law eta=1.2: passed={rep.passed}")

# With gamma = 1/2 and theta linear in t, the jump-wings skew and wings do
# not depend on expiry, and the ATM skew decays like 1/sqrt(t).
s = SsviSurface(rho, PowerLaw(1.0, 0.5), theta)
print("\n  t     psi        p        c       ATM skew")
for t in (0.25, 1.0, 4.0):
    j = ssvi_to_jw(t, s)
    print(f"{t:4.2f}  {j.psi:.6f}  {j.p:.5f}  {j.c:.5f}  {atm_skew(t, s):.6f}")
