"""Refit the inline-amplifier excess noise from measured low-power EDC points.

The shipped link presets carry an ``excess_noise_db`` fitted this way: only
measured EDC points at least 6 dB below the measured EDC optimum are used, so
fibre nonlinearity plays no part in the fit.
"""

import argparse

from oband_dbp.harness import load_preset
from oband_dbp.harness.calibration import fit_excess_noise, reference_curves


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--wavelength", type=float, default=1310.0, choices=[1290.0, 1310.0, 1330.0])
    ap.add_argument("--traces", type=int, default=2)
    ap.add_argument("--margin", type=float, default=6.0, help="dB below the measured EDC optimum")
    args = ap.parse_args()

    curve = reference_curves()[(args.wavelength, 50.0, "edc")]
    opt = max(curve, key=lambda p: p[1])[0]
    points = [(p, s) for p, s in curve if p <= opt - args.margin]
    cfg = load_preset(f"{args.wavelength:g}nm_50gbd")
    fit = fit_excess_noise(cfg, points, n_traces=args.traces)

    print(f"{args.wavelength:g} nm: measured EDC optimum at {opt:g} dBm, fitting {len(points)} points")
    for p, t, f in zip(fit.lop1_dbm, fit.target_snr_db, fit.fitted_snr_db):
        print(f"  {p:5.1f} dBm  measured {t:6.2f} dB  model {f:6.2f} dB")
    print(f"excess noise {fit.excess_noise_db:.2f} dB (shipped {cfg.link().excess_noise_db:.2f} dB), rms {fit.rms_error_db:.2f} dB")


if __name__ == "__main__":
    main()
