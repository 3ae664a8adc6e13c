"""Command-line front end: ``simulate``, ``tworay`` and ``sounder-demo``.

Exit codes: 0 success, 1 validation error (bad config, arguments or input
files), 2 runtime failure (campaign failure, estimation failure, I/O).
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analytic import LinkBudget, critical_distance, two_ray_rss
from .campaign import parse_config, run_campaign, write_outputs
from .errors import CampaignError, ConfigError, EstimationError
from .raytrace import fresnel_reflection
from .scene import MaterialKind, material_permittivity
from .sounder import (SounderConfig, apply_channel, correct_cfo, estimate_cfo, extract_cir,
                      matched_filter, parse_cir_text, pn_sequence, synthesize_tx, write_iq)

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2

DEFAULT_DEMO_PATHS = "0,1,0\n3,0.25,0.433013\n10,-0.176777,0.176777\n"


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; map them to the validation code
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _add_version(p):
    p.add_argument("--version", action="version", version=f"uavmmw {__version__}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="uavmmw", description=__doc__.splitlines()[0])
    _add_version(parser)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="run a scenario/frequency/height campaign")
    _add_version(p)
    p.add_argument("--config", required=True, type=Path, help="key = value campaign file")
    p.add_argument("--out", type=Path, help="output directory (overrides output_dir)")
    p.add_argument("--workers", type=int, help="worker processes (overrides workers)")
    p.add_argument("--seed", type=int, help="scenario seed (overrides seed)")

    p = sub.add_parser("tworay", help="emit the analytic two-ray RSS curve as CSV")
    _add_version(p)
    p.add_argument("--ht", type=float, default=2.0, help="tx height in m")
    p.add_argument("--hr", type=float, default=50.0, help="rx height in m")
    p.add_argument("--fc", type=float, default=28e9, help="carrier in Hz")
    p.add_argument("--dmin", type=float, default=1.0, help="first distance in m")
    p.add_argument("--dmax", type=float, default=2000.0, help="last distance in m")
    p.add_argument("--step", type=float, default=1.0, help="distance step in m")
    p.add_argument("--tx-power", type=float, default=30.0, help="tx power in dBm")
    p.add_argument("--ground", choices=["ideal", "dry_ground", "sea_water"], default="ideal",
                   help="reflection coefficient: -1 or a Fresnel ground")
    p.add_argument("--out", type=Path, help="write CSV here instead of stdout")

    p = sub.add_parser("sounder-demo", help="synthetic PN-sounder loopback")
    _add_version(p)
    p.add_argument("--cfo", type=float, default=10e3, help="carrier offset in Hz")
    p.add_argument("--snr", type=float, default=20.0, help="per-sample SNR in dB")
    p.add_argument("--paths", type=Path, help="CIR file: delay_samples,gain_real,gain_imag")
    p.add_argument("--degree", type=int, default=12, help="PN sequence degree")
    p.add_argument("--periods", type=int, default=8, help="sequence periods transmitted")
    p.add_argument("--fs", type=float, default=25e6, help="sample rate in Hz")
    p.add_argument("--cut", type=float, default=20.0, help="peak cut in dB")
    p.add_argument("--seed", type=int, default=0, help="noise seed")
    p.add_argument("--out", type=Path, help="write the estimated CIR here")
    p.add_argument("--iq", type=Path, help="record the received capture here")
    return parser


def _simulate(args):
    try:
        cfg = parse_config(args.config.read_text())
    except OSError as exc:
        raise ValueError(f"cannot read config: {exc}") from None
    overrides = {}
    if args.out is not None:
        overrides["output_dir"] = str(args.out)
    if args.workers is not None:
        overrides["workers"] = args.workers
    if args.seed is not None:
        overrides["seed"] = args.seed
    cfg = dataclasses.replace(cfg, **overrides)
    res = run_campaign(cfg)
    files = write_outputs(res)
    for (label, f_c, h), tr in res.traces.items():
        finite = tr.rss_dbm[np.isfinite(tr.rss_dbm)]
        mean = f"{finite.mean():.2f} dBm" if len(finite) else "no coverage"
        print(f"{label} {f_c / 1e9:g} GHz {h:g} m: {len(tr)} points, mean RSS {mean}")
    print(f"wrote {len(files)} files to {cfg.output_dir} (config hash {res.config_hash})")


def _tworay(args):
    if not 0 < args.dmin <= args.dmax or args.step <= 0:
        raise ValueError("need 0 < dmin <= dmax and step > 0")
    lb = LinkBudget(args.tx_power, args.fc, args.ht, args.hr)
    n = int(math.floor((args.dmax - args.dmin) / args.step + 1e-9)) + 1
    d = args.dmin + args.step * np.arange(n)
    if args.ground == "ideal":
        gamma = -1.0
    else:
        eta = material_permittivity(MaterialKind(args.ground), args.fc)
        gamma = fresnel_reflection(eta, np.arctan2(args.ht + args.hr, d))
    rss = np.atleast_1d(two_ray_rss(lb, d, gamma))
    rows = ["distance_m,rss_dbm"] + [f"{x:.6g},{r:.6g}" for x, r in zip(d, rss)]
    text = "\n".join(rows) + "\n"
    if args.out:
        args.out.write_text(text)
    else:
        sys.stdout.write(text)
    dc = critical_distance(args.ht, args.hr, lb.wavelength)
    print(f"critical distance {dc:.6g} m", file=sys.stderr)


def _sounder_demo(args):
    text = args.paths.read_text() if args.paths else DEFAULT_DEMO_PATHS
    truth = parse_cir_text(text)
    if not truth:
        raise ValueError("channel file has no paths")
    seq = pn_sequence(args.degree)
    cfg = SounderConfig(sample_rate=args.fs, periods=args.periods)
    rx = apply_channel(synthesize_tx(seq, cfg), truth, cfo=args.cfo, snr_db=args.snr, rng=args.seed)
    if args.iq:
        write_iq(args.iq, rx)
    f_hat = estimate_cfo(rx)
    est = extract_cir(matched_filter(correct_cfo(rx, f_hat), seq), len(seq), cut_db=args.cut)
    bin_hz = args.fs / (2 * len(rx))
    print(f"sequence degree {seq.degree} length {len(seq)} periods {cfg.periods}")
    print(f"cfo true {args.cfo:.6g} Hz estimated {f_hat:.6g} Hz error {f_hat - args.cfo:.6g} Hz "
          f"(bin {bin_hz:.6g} Hz)")
    if est.no_detection:
        print("no detection")
    got = dict(est.paths)
    for d, g in sorted(truth):
        e = got.get(d)
        found = f"estimated |g| {abs(e):.4f}" if e is not None else "missed"
        print(f"path delay {d} samples true |g| {abs(g):.4f} {found}")
    if args.out:
        args.out.write_text(est.to_text())
    else:
        sys.stdout.write(est.to_text())


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"simulate": _simulate, "tworay": _tworay, "sounder-demo": _sounder_demo}[args.command]
    try:
        handler(args)
    except (CampaignError, EstimationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (ConfigError, ValueError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK
