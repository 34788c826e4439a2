"""Optional chart rendering for experiment CSV tables (matplotlib, Agg)."""

from __future__ import annotations

import csv
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def _read_csv(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def render_plot(csv_path: str, experiment: str, out_path: str) -> bool:
    """Render the accuracy-vs-condition chart for one experiment CSV.

    Returns False when the experiment has no associated chart.
    """
    header, rows = _read_csv(csv_path)
    fig, ax = plt.subplots(figsize=(6, 4))
    try:
        if experiment in ("accuracy", "collapse", "velocity"):
            x = [float(r[0]) for r in rows]
            series = header[1:]
            width = 0.8 / len(series)
            for si, name in enumerate(series):
                if name == "change_pct":
                    continue
                vals = [float(r[si + 1]) for r in rows]
                ax.bar(
                    [xi + si * width for xi in range(len(x))],
                    vals,
                    width=width,
                    label=name,
                )
            ax.set_xticks(range(len(x)))
            ax.set_xticklabels([f"{v:g}" for v in x])
            ax.set_xlabel(header[0])
            ax.set_ylabel("accuracy")
            ax.set_ylim(0, 1.05)
            ax.legend()
        elif experiment == "perturbation":
            x = [int(r[0]) for r in rows]
            ax.plot(x, [float(r[1]) for r in rows], "o-", label="glcm3d perturbed")
            ax.axhline(
                float(rows[0][2]), color="gray", ls="--", label="single taxel"
            )
            ax.set_xlabel("taxels perturbed")
            ax.set_ylabel("mean accuracy")
            ax.set_ylim(0, 1.05)
            ax.legend()
        elif experiment == "tor":
            by_velocity: dict[str, list[tuple[float, float]]] = {}
            refs: dict[str, float] = {}
            for r in rows:
                by_velocity.setdefault(r[0], []).append((float(r[1]), float(r[2])))
                refs[r[0]] = float(r[3])
            for vel, pts in by_velocity.items():
                pts.sort()
                ax.plot(
                    [p[0] for p in pts],
                    [p[1] for p in pts],
                    "o-",
                    label=f"glcm3d @ {vel} mm/s",
                )
            for vel, ref in refs.items():
                ax.axhline(ref, ls="--", alpha=0.4)
            ax.set_xlabel("fraction of sliding time")
            ax.set_ylabel("accuracy")
            ax.set_ylim(0, 1.05)
            ax.legend(fontsize=8)
        elif experiment == "gains":
            gains: dict[str, list[tuple[float, float]]] = {}
            for r in rows:
                if r[2] == "":
                    continue
                gains.setdefault(r[1], []).append((float(r[0]), float(r[2])))
            for label, pts in sorted(gains.items()):
                pts.sort()
                ax.plot([p[0] for p in pts], [p[1] for p in pts], "o-", label=label)
            ax.set_xlabel("gain")
            ax.set_ylabel("mean ISI (s)")
            ax.legend(fontsize=8)
        else:
            return False
        fig.tight_layout()
        fig.savefig(out_path, dpi=120)
        return True
    finally:
        plt.close(fig)


def render_all(out_dir: str, names) -> list[str]:
    written = []
    for name in names:
        csv_path = os.path.join(out_dir, f"{name}.csv")
        if not os.path.exists(csv_path):
            continue
        png_path = os.path.join(out_dir, f"{name}.png")
        if render_plot(csv_path, name, png_path):
            written.append(png_path)
    return written
