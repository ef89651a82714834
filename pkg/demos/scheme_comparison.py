"""Desk-scale BER comparison of the five forwarding schemes.

Runs the shrunk campaign (100 realizations, 10 frames of 256 info bits,
SNR 4/8/12 dB) at relay location B and prints one BER column per scheme.
Takes a couple of minutes on one core; pass --realizations to shrink it
further for a quick look.
"""

import argparse
import sys
from dataclasses import replace

from vfdrelay.sim import ScenarioConfig, run_campaign


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--location", choices=("A", "B"), default="B")
    parser.add_argument("--realizations", type=int, default=None,
                        help="override the desk default of 100")
    args = parser.parse_args(argv)

    config = ScenarioConfig(relay_location=args.location).desk_scaled()
    if args.realizations is not None:
        config = replace(config, realizations=args.realizations)
    config.validate()

    print(f"location {config.relay_location}, {config.realizations} realizations, "
          f"{config.num_frames} frames x {config.info_bits} info bits")
    campaign = run_campaign(config)

    width = max(len(s) for s in config.schemes)
    header = "snr_db  " + "  ".join(f"{s:>{width}}" for s in config.schemes)
    print(header)
    for snr_db in config.snr_grid_db:
        cells = []
        for scheme in config.schemes:
            rec = campaign.record(scheme, snr_db)
            cells.append(f"{rec.ber:>{width}.3e}")
        print(f"{snr_db:6.1f}  " + "  ".join(cells))

    print("\nexpect: perfect-relay best, proposed-with-pe close behind, "
          "proposed-without-pe worst")
    return 0


if __name__ == "__main__":
    sys.exit(main())
