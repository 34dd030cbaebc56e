"""EDC versus single-step DBP over first-span launch power.

Runs the 1310 nm / 50 GBd preset, prints both SNR curves with the DBP gain,
and reports the optimal launch powers.  Use ``--traces 50`` for the full
Monte-Carlo average (several minutes on one core).
"""

import argparse

from oband_dbp.harness import load_preset, sweep_lop


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--preset", default="1310nm_50gbd")
    ap.add_argument("--traces", type=int, default=4)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    cfg = load_preset(args.preset).with_overrides(n_traces=args.traces)
    res = sweep_lop(cfg, workers=args.workers)
    edc, dbp = res.snr_by_lop("edc"), res.snr_by_lop("dbp")

    print(f"{args.preset}, {args.traces} traces per point")
    print(f"{'LOP1 [dBm]':>10} {'EDC [dB]':>9} {'DBP [dB]':>9} {'gain [dB]':>9}")
    for p in sorted(edc):
        print(f"{p:10.1f} {edc[p]:9.2f} {dbp[p]:9.2f} {dbp[p] - edc[p]:9.2f}")

    e_opt, d_opt = res.meta["optimal_lop1_dbm_edc"], res.meta["optimal_lop1_dbm_dbp"]
    print(f"EDC optimum {edc[e_opt]:.2f} dB at {e_opt:g} dBm; DBP optimum {dbp[d_opt]:.2f} dB at {d_opt:g} dBm")
    print(f"DBP gain at the EDC optimum: {dbp[e_opt] - edc[e_opt]:.2f} dB")
    print(f"Peak-to-peak gain: {dbp[d_opt] - edc[e_opt]:.2f} dB")


if __name__ == "__main__":
    main()
