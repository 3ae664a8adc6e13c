"""Trace one urban link and look at its multipath.

Run with ``python3 demos/trace_urban_link.py``.
"""

from uavmmw.metrics import Cir, narrowband_rss, rms_delay_spread
from uavmmw.raytrace import TraceConfig, Tracer, format_paths
from uavmmw.scene import ScenarioKind, default_tx, export_scene, generate_scenario

scene = generate_scenario(ScenarioKind.URBAN, seed=1)
print(f"urban scene: {len(scene.buildings)} buildings; first lines of the scene file:")
print("\n".join(export_scene(scene).splitlines()[:3]))

tx = default_tx(2.0)
tracer = Tracer(scene, tx, TraceConfig(max_order=2, diffraction=True))
rx = (tx[0] + 600.0, tx[1], 100.0)

paths = tracer.find_paths(rx)
components = tracer.components(paths, 28e9)
print("\nmultipath components at 28 GHz:")
print(format_paths(components), end="")

cir = Cir(tuple(components), 28e9, tx, rx, paths.los_blocked)
print(f"\n{len(cir)} components above the dynamic range")
print(f"received level {narrowband_rss(cir, 30.0):.2f} dBm at 30 dBm transmit power")
print(f"RMS delay spread {rms_delay_spread(cir) * 1e9:.3f} ns")
