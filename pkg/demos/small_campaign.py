"""A reduced measurement campaign across scenarios, with files written to disk.

Run with ``python3 demos/small_campaign.py [output_dir]``.
"""

import sys

import numpy as np

from uavmmw.campaign import parse_config, run_campaign, write_outputs

CONFIG = """
scenarios = oversea, rural, suburban, urban
frequencies = 28e9, 60e9
heights = 50, 150
trajectory_length = 1000
trajectory_spacing = 10
seed = 1
"""

res = run_campaign(parse_config(CONFIG))
for (label, f_c, h), tr in sorted(res.traces.items()):
    ds = np.nanmedian(tr.rms_ds) * 1e9
    print(f"{label:9s} {f_c / 1e9:g} GHz {h:5g} m: mean RSS {np.nanmean(tr.rss_dbm):7.2f} dBm, "
          f"median RMS-DS {ds:.3f} ns")

out = sys.argv[1] if len(sys.argv) > 1 else "small_campaign_out"
files = write_outputs(res, out)
print(f"\nwrote {len(files)} files to {out} (config hash {res.config_hash})")
