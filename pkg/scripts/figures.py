"""Export the leakage and splice demonstrations (waveform CSV, spectrogram CSV/PGM).

    python3 scripts/figures.py --out /tmp/figs
"""

import argparse
import math

from splicelab.cli import main as cli


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", required=True)
    args = ap.parse_args()
    common = ["--out", args.out, "--quiet"]
    for win in (80, 88):
        cli(["demo", "leakage", "--f0", "800", "--fs", "16000", "--win", str(win), *common])
    cli(["demo", "splice", "--scenario", "identical", *common])
    cli(["demo", "splice", "--scenario", "phase", "--phase", "pi", *common])
    cli(["demo", "splice", "--scenario", "amplitude", "--ratio", "0.5", *common])
    print(f"# phase jump used: {math.pi:.6f} rad")


if __name__ == "__main__":
    main()
