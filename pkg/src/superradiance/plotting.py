"""Per-figure data bundles and PNG renderings of a finished run."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .errors import ConfigError  # noqa: E402
from .io import OutputWriter, find_table, load_manifest, read_table  # noqa: E402
from .stochastic import phase_coherence  # noqa: E402

STYLE = {
    "font.size": 8,
    "axes.labelsize": 9,
    "legend.fontsize": 7,
    "lines.linewidth": 1.0,
    "figure.figsize": (3.4, 2.4),
    "figure.dpi": 120,
    "svg.hashsalt": "superradiance",
}

SCHEMA = {
    "fig1c": {
        "p": "initial inversion",
        "t": "time after resonance restoration (s)",
        "abs_a": "cavity amplitude |a| (sqrt photon)",
    },
    "fig2d": {
        "eta": "trigger displacement (units of theta_bar)",
        "n_trig": "trigger photons",
        "coherence": "mean pairwise cos(phi_i - phi_j)",
        "ci_low": "bootstrap 2.5% quantile",
        "ci_high": "bootstrap 97.5% quantile",
    },
    "fig2e": {
        "n_trig": "trigger photons",
        "eta": "trigger displacement",
        "t_d": "rescaled delay time (s)",
        "phase": "drift-corrected burst phase (rad)",
    },
    "fig3a": {
        "t": "time (s)",
        "abs_a_spins": "|a| with the partially inverted ensemble (sqrt photon)",
        "abs_a_empty": "|a| of the empty cavity (sqrt photon)",
        "delta_abs_a": "abs_a_spins - abs_a_empty (sqrt photon)",
        "p": "ensemble inversion",
    },
    "figS1": {
        "t": "time (s)",
        "abs_a": "simulated |a| (sqrt photon)",
        "abs_a_target": "target |a| (sqrt photon)",
        "p": "ensemble inversion",
    },
    "figS2a": {
        "n_trig": "trigger photons",
        "t_d": "raw delay time (s)",
        "max_amp": "burst maximum |a| (sqrt photon)",
    },
    "figS2b": {
        "n_trig": "trigger photons",
        "t_d": "raw delay time (s)",
        "phase": "raw burst phase (rad)",
        "phase_corrected": "drift-corrected phase (rad)",
    },
    "figS3a": {
        "frequency_hz": "probe frequency (Hz)",
        "p": "ensemble inversion",
        "s_param_db": "transmitted power relative to the bare resonance (dB)",
    },
}


def bootstrap_coherence(phases, n_boot: int, rng) -> tuple[float, float]:
    phases = np.asarray(phases, dtype=float)
    n = phases.size
    vals = np.empty(n_boot)
    for b in range(n_boot):
        vals[b] = phase_coherence(phases[rng.integers(0, n, n)])
    lo, hi = np.percentile(vals, [2.5, 97.5])
    return float(lo), float(hi)


def _groups(table, key="n_trig"):
    keys = table[key]
    for v in sorted(set(keys.tolist()), reverse=True):
        yield v, keys == v


def _fig1c(run, w, fmt):
    bursts = read_table(find_table(run, "bursts"))
    rows = []
    fig, ax = plt.subplots()
    for k, p in zip(bursts["index"].astype(int), bursts["p"]):
        tr = read_table(find_table(run, f"traj_{k:02d}"))
        amp = np.hypot(tr["re_a"], tr["im_a"])
        rows.extend([p, t, a] for t, a in zip(tr["t"], amp))
        ax.plot(tr["t"] * 1e6, amp, label=f"p = {p:.3g}")
    ax.set_xlabel("t (us)")
    ax.set_ylabel("|a|")
    ax.legend(frameon=False)
    fig.tight_layout()
    w.table("fig1c", list(SCHEMA["fig1c"]), rows, fmt)
    w.figure("fig1c", fig)
    plt.close(fig)


def _fig2(run, w, fmt, seed, n_boot):
    raw = read_table(find_table(run, "shots"))
    cor = read_table(find_table(run, "shots_corrected"))
    rng = np.random.default_rng(seed)
    d_rows, e_rows = [], []
    for n, m in _groups(cor):
        ph = cor["phase"][m]
        coh = phase_coherence(ph)
        lo, hi = bootstrap_coherence(ph, n_boot, rng)
        eta = float(cor["eta"][m][0])
        d_rows.append([eta, n, coh, lo, hi])
        e_rows.extend([n, eta, t, p] for t, p in zip(cor["t_d"][m], ph))
    w.table("fig2d", list(SCHEMA["fig2d"]), d_rows, fmt)
    w.table("fig2e", list(SCHEMA["fig2e"]), e_rows, fmt)
    w.table("figS2a", list(SCHEMA["figS2a"]), zip(raw["n_trig"], raw["t_d"], raw["max_amp"]), fmt)
    # corrected rows are a subset when outliers were excluded; match by order within each set
    b_rows = []
    for n, m in _groups(raw):
        mc = cor["n_trig"] == n
        phc = cor["phase"][mc]
        for k, (t, p) in enumerate(zip(raw["t_d"][m], raw["phase"][m])):
            b_rows.append([n, t, p, phc[k] if k < phc.size else np.nan])
    w.table("figS2b", list(SCHEMA["figS2b"]), b_rows, fmt)

    fig, ax = plt.subplots()
    d = np.array(d_rows)
    x = np.where(d[:, 1] > 0, d[:, 1], np.nan)
    ax.errorbar(x, d[:, 2], yerr=[d[:, 2] - d[:, 3], d[:, 4] - d[:, 2]], fmt="o", ms=3)
    ax.set_xscale("log")
    ax.set_xlabel("n_trig")
    ax.set_ylabel("<cos(phi_i - phi_j)>")
    fig.tight_layout()
    w.figure("fig2d", fig)
    plt.close(fig)

    fig, ax = plt.subplots()
    e = np.array(e_rows)
    levels = sorted(set(e[:, 0].tolist()))
    for k, n in enumerate(levels):
        m = e[:, 0] == n
        jitter = (np.random.default_rng(k).random(m.sum()) - 0.5) * 0.4
        ax.plot(k + jitter, e[m, 2] * 1e6, ".", ms=2)
    ax.set_xticks(range(len(levels)))
    ax.set_xticklabels([f"{n:.2g}" for n in levels], rotation=60)
    ax.set_xlabel("n_trig")
    ax.set_ylabel("t_D (us)")
    fig.tight_layout()
    w.figure("fig2e", fig)
    plt.close(fig)


def _fig3a(run, w, fmt):
    s = read_table(find_table(run, "traj_spins"))
    e = read_table(find_table(run, "traj_empty"))
    a_s = np.hypot(s["re_a"], s["im_a"])
    a_e = np.hypot(e["re_a"], e["im_a"])
    w.table("fig3a", list(SCHEMA["fig3a"]), zip(s["t"], a_s, a_e, a_s - a_e, s["p"]), fmt)
    fig, ax = plt.subplots()
    ax.plot(s["t"] * 1e6, a_s, label="spins")
    ax.plot(e["t"] * 1e6, a_e, label="empty cavity")
    ax.set_xlabel("t (us)")
    ax.set_ylabel("|a|")
    ax.legend(frameon=False)
    fig.tight_layout()
    w.figure("fig3a", fig)
    plt.close(fig)


def _figS1(run, w, fmt):
    tr = read_table(find_table(run, "traj_best"))
    tg = read_table(find_table(run, "target"))
    target = np.interp(tr["t"], tg["t"], np.hypot(tg["re_a"], tg["im_a"]), right=0.0)
    amp = np.hypot(tr["re_a"], tr["im_a"])
    w.table("figS1", list(SCHEMA["figS1"]), zip(tr["t"], amp, target, tr["p"]), fmt)
    fig, ax = plt.subplots()
    ax.plot(tr["t"] * 1e9, amp, label="simulated")
    ax.plot(tr["t"] * 1e9, target, "--", label="target")
    ax2 = ax.twinx()
    ax2.plot(tr["t"] * 1e9, tr["p"], color="k", lw=0.8)
    ax.set_xlabel("t (ns)")
    ax.set_ylabel("|a|")
    ax2.set_ylabel("p")
    ax.legend(frameon=False)
    fig.tight_layout()
    w.figure("figS1", fig)
    plt.close(fig)


def _figS3a(run, w, fmt):
    tab = read_table(find_table(run, "transmission"))
    w.table("figS3a", list(SCHEMA["figS3a"]), zip(tab["frequency_hz"], tab["p"], tab["s_param_db"]), fmt)
    fig, ax = plt.subplots()
    for p, m in _groups(tab, "p"):
        ax.plot((tab["frequency_hz"][m] - tab["frequency_hz"][m].mean()) / 1e6, tab["s_param_db"][m], label=f"p = {p:g}")
    ax.set_xlabel("detuning (MHz)")
    ax.set_ylabel("|S21|^2 (dB)")
    ax.legend(frameon=False)
    fig.tight_layout()
    w.figure("figS3a", fig)
    plt.close(fig)


def emit_plot_data(run_dir, out_dir=None, fmt: str = "csv", n_boot: int | None = None) -> list:
    """Write per-figure bundles, PNGs and ``schema.json`` for a completed run.

    Output goes to ``run_dir/plots`` unless ``out_dir`` is given.  Returns the
    list of written files (relative to the output directory).
    """
    run = Path(run_dir)
    manifest = load_manifest(run)
    kind = manifest.get("kind")
    out = Path(out_dir) if out_dir is not None else run / "plots"
    w = OutputWriter(out, fmt)
    seed = int(manifest.get("seed", 0))
    with plt.rc_context(STYLE):
        if kind == "self_decay":
            _fig1c(run, w, fmt)
        elif kind == "triggered_sr":
            boot = n_boot if n_boot is not None else int(manifest.get("bootstrap", 1000))
            _fig2(run, w, fmt, seed, boot)
        elif kind == "pulse_train":
            _fig3a(run, w, fmt)
        elif kind == "inversion_scan":
            _figS1(run, w, fmt)
        elif kind == "transmission_sweep":
            _figS3a(run, w, fmt)
        elif kind == "calibration":
            pass
        else:
            raise ConfigError(f"unknown run kind {kind!r} in manifest")
    names = sorted({Path(a).stem for a in w.artifacts if a.endswith((".csv", ".json"))})
    w.json("schema", {n: {"columns": SCHEMA[n]} for n in names})
    w.manifest({"kind": kind, "source": manifest.get("config_sha256")})
    return list(w.artifacts)
