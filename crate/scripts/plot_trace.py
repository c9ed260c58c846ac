"""Plot a trace.csv written by the simulator.

usage: python3 scripts/plot_trace.py out/case1/trace.csv [-o case1.png]
"""

import argparse

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("trace")
    parser.add_argument("-o", "--output", help="image file (default: next to the trace)")
    args = parser.parse_args()

    df = pd.read_csv(args.trace)
    t = df["t"]
    vsi = sorted(c for c in df.columns if c.startswith("p_vsi"))

    fig, ax = plt.subplots(4, 1, sharex=True, figsize=(9, 10))
    for col in ["p_pv", "p_bat", "p_dcload"]:
        ax[0].plot(t, df[col] / 1e3, label=col)
    ax[0].set_ylabel("DC side, kW")
    for col in vsi:
        ax[1].plot(t, df[col] / 1e3, label=col)
    ax[1].set_ylabel("inverters, kW")
    ax[2].plot(t, df["v_dc"], label="v_dc")
    ax[2].plot(t, df["v_pcc_rms"], label="v_pcc_rms")
    ax[2].set_ylabel("V")
    ax[3].plot(t, df["f_pcc"], label="f_pcc")
    ax[3].set_ylabel("Hz")
    ax[3].set_xlabel("t, s")
    for a in ax:
        a.grid(True, alpha=0.3)
        a.legend(loc="upper right", fontsize="small")

    out = args.output or args.trace.rsplit(".", 1)[0] + ".png"
    fig.tight_layout()
    fig.savefig(out, dpi=120)
    print(out)


if __name__ == "__main__":
    main()
