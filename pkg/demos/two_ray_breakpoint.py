"""Two-ray ground reflection: oscillation region, breakpoint and far-field slope.

Run with ``python3 demos/two_ray_breakpoint.py``.
"""

import numpy as np

from uavmmw.analytic import LinkBudget, critical_distance, extrema_count, fit_slope_db_per_decade, two_ray_rss

# A 2 m ground terminal talking to a 2 m receiver at 28 GHz.
lb = LinkBudget(tx_power_dbm=30.0, f_c=28e9, h_t=2.0, h_r=2.0)
dc = critical_distance(lb.h_t, lb.h_r, lb.wavelength)
print(f"critical distance 4 h_t h_r / lambda = {dc:.1f} m")

# Past the breakpoint the two rays cancel and the level falls at 40 dB/decade.
d = np.geomspace(2 * dc, 20 * dc, 500)
print(f"far-field slope {fit_slope_db_per_decade(d, two_ray_rss(lb, d)):.2f} dB/decade")

# Before it the level oscillates; the ripple gets denser with frequency and receiver height.
for f_c in (28e9, 60e9):
    for h_r in (50.0, 100.0, 150.0):
        n = extrema_count(LinkBudget(f_c=f_c, h_t=2.0, h_r=h_r), 100.0, 2000.0)
        print(f"{f_c / 1e9:g} GHz, h_r {h_r:g} m: {n} local minima over 100-2000 m")
