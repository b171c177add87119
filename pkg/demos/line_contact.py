"""Line-contact EHL solve: Reynolds equation, elastic film and force balance.

Uses demos/line_contact.ini, a physically consistent operating point
(Hertz pressure 1 GPa, lambda = 0.032).  Prints the outlet pressure spike,
the minimum film and the closed force balance; with matplotlib installed
it also writes line_contact.png.

Run:  python demos/line_contact.py
"""
import math
from pathlib import Path

import numpy as np

from ehldg.cli import run_case
from ehldg.config import load_config

here = Path(__file__).parent
cfg = load_config(here / "line_contact.ini")
out = Path("out/line_contact")
summary = run_case(cfg, out)

print(f"h00 = {summary['h00']:.6f}   int u - pi/2 = {summary['force_residual']:.2e}")
print(f"min u = {summary['min_pressure']:.2e}   inner residual = {summary['residual']:.2e}")

p = np.loadtxt(out / "pressure.csv", delimiter=",", skiprows=1)
h = np.loadtxt(out / "film.csv", delimiter=",", skiprows=1)
k = np.argmax(p[:, 1])
print(f"peak pressure {p[k, 1]:.4f} at x = {p[k, 0]:.4f} (Hertz peak 1 at x = 0)")
print(f"minimum film {h[:, 1].min():.4e} at x = {h[np.argmin(h[:, 1]), 0]:.4f}")
outlet = p[:, 0] > 0.5
j = np.argmax(np.where(outlet, p[:, 1], -np.inf))
print(f"outlet pressure spike {p[j, 1]:.4f} at x = {p[j, 0]:.4f}; the film is nearly flat across the contact")

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    plt = None
if plt is not None:
    fig, ax = plt.subplots(2, 1, sharex=True, figsize=(6, 5))
    xs = np.linspace(-1, 1, 201)
    ax[0].plot(p[:, 0], p[:, 1], ".", ms=2, label="DG pressure")
    ax[0].plot(xs, np.sqrt(1 - xs**2), "k--", lw=0.8, label="Hertz")
    ax[0].legend()
    ax[1].plot(h[:, 0], h[:, 1], ".", ms=2)
    ax[1].set_xlabel("x")
    ax[0].set_ylabel("u")
    ax[1].set_ylabel("h")
    fig.savefig(out / "line_contact.png", dpi=120)
    print(f"wrote {out / 'line_contact.png'}")
assert abs(summary["integral"] - math.pi / 2) <= 1e-4
