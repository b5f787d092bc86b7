"""
Spotting butterfly arbitrage in a single smile
==============================================

A raw SVI slice can look perfectly reasonable in implied volatility and still
imply a negative probability density. This walks through the classic example
and the quantities used to detect it.
"""

import numpy as np

from svi_surface import RawSviParams, check_butterfly, density_at, g_function, raw_to_jw

# The slice: one year to expiry, raw parameters (a, b, rho, m, sigma).
vogt = RawSviParams(a=-0.0410, b=0.1331, rho=0.3060, m=0.3586, sigma=0.4153)
t = 1.0

# Implied vols look smooth.
k = np.linspace(-1.5, 1.5, 13)
print("   k     vol      g(k)     density")
for ki, wi, gi, pi in zip(k, vogt(k), g_function(k, vogt), density_at(k, vogt)):
    print(f"{ki:5.2f}  {np.sqrt(wi / t):6.4f}  {gi:8.4f}  {pi:9.5f}")

# g(k) < 0 means the density of log-moneyness is negative there.
rep = check_butterfly(vogt)
print(f"\nmin g = {rep.min_g:.5f} at k = {rep.min_g_location:.4f}; arbitrage-free: {rep.is_free}")

# The same slice in jump-wings coordinates: ATM variance, skew, wing slopes,
# minimum variance. These are the handles used by the repairs in demo 02.
j = raw_to_jw(vogt, t)
print(f"\njump-wings: v={j.v:.8f} psi={j.psi:.7f} p={j.p:.7f} c={j.c:.6f} v~={j.v_tilde:.7f}")
