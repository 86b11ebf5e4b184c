//! Emits a standalone matplotlib script that renders a sweep CSV.

use chiral_ring::model::omega_d_bar;
use chiral_ring::DeviceParams;

/// Python source plotting the current heatmap with the zero-current guides
/// φ = nπ/N, the N optimal-frequency curves, and one n_k map per momentum.
/// The script reads only the CSV named on its command line (default: `csv`).
pub fn plot_script(csv: &str, device: &DeviceParams, eps_d: f64, image: &str) -> String {
    let n = device.n_sites;
    let bar = omega_d_bar(device, eps_d);
    let j0 = device.j0;
    let csv_lit = py_str(csv);
    let image_lit = py_str(image);
    format!(
        r#"#!/usr/bin/env python3
"""Plot a chiral-ring sweep CSV. Usage: python3 this.py [sweep.csv] [out.png]"""
import csv
import math
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

N = {n}
OMEGA_D_BAR = {bar:.17e}
J0 = {j0:.17e}

path = sys.argv[1] if len(sys.argv) > 1 else {csv_lit}
image = sys.argv[2] if len(sys.argv) > 2 else {image_lit}

with open(path, newline="") as fh:
    rows = list(csv.DictReader(fh))
if not rows:
    sys.exit("no data rows in " + path)

omega = sorted({{float(r["omega_d"]) for r in rows}})
phi = sorted({{float(r["phi"]) for r in rows}})
oi = {{w: j for j, w in enumerate(omega)}}
pi_ = {{p: i for i, p in enumerate(phi)}}


def grid(column):
    g = np.full((len(phi), len(omega)), np.nan)
    for r in rows:
        g[pi_[float(r["phi"])], oi[float(r["omega_d"])]] = float(r[column])
    return g


current = grid("current_natural")
nk = [grid("n_k%d" % k) for k in range(N)]
extent = [(omega[0] - OMEGA_D_BAR) / J0, (omega[-1] - OMEGA_D_BAR) / J0, phi[0], phi[-1]]
phis = np.linspace(phi[0], phi[-1], 400)


def guides(ax):
    for n in range(2 * N):
        ax.axhline(n * math.pi / N, color="k", lw=0.5, ls=":")
    for k in range(N):
        x = -np.cos(2 * math.pi * k / N + phis)
        ax.plot(x, phis, lw=0.8, ls="--", label="k=%d" % k)
    ax.set_xlim(extent[0], extent[1])
    ax.set_ylim(extent[2], extent[3])
    ax.set_xlabel(r"$(\omega_d - \bar\omega_d)/J_0$")
    ax.set_ylabel(r"$\varphi$")


fig, axes = plt.subplots(1, N + 1, figsize=(4.5 * (N + 1), 4), constrained_layout=True)
scale = np.nanmax(np.abs(current)) or 1.0
im = axes[0].imshow(current, origin="lower", aspect="auto", extent=extent, cmap="RdBu_r", vmin=-scale, vmax=scale)
fig.colorbar(im, ax=axes[0], label="current (2π·GHz)")
axes[0].set_title("permanent current")
guides(axes[0])
axes[0].legend(fontsize="small", loc="upper right")
for k in range(N):
    im = axes[k + 1].imshow(nk[k], origin="lower", aspect="auto", extent=extent, cmap="viridis")
    fig.colorbar(im, ax=axes[k + 1])
    axes[k + 1].set_title("n_k, k = 2π·%d/%d" % (k, N))
    guides(axes[k + 1])
fig.savefig(image, dpi=150)
print("wrote", image)
"#
    )
}

fn py_str(s: &str) -> String {
    format!("{s:?}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn script_embeds_parameters() {
        let device = DeviceParams::default();
        let s = plot_script("out/sweep.csv", &device, 0.05, "sweep.png");
        assert!(s.contains("N = 3\n"));
        assert!(s.contains("\"out/sweep.csv\""));
        assert!(s.contains("J0 = 1.00000000000000002e-3"));
        let bar: f64 = s
            .lines()
            .find_map(|l| l.strip_prefix("OMEGA_D_BAR = "))
            .unwrap()
            .parse()
            .unwrap();
        assert_eq!(bar, omega_d_bar(&device, 0.05));
        assert!(!s.contains("{{"));
    }
}
