"""Flat-file report emission and histogram figures."""

from __future__ import annotations

import csv
import json

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

CLEAN_COLOR = "tab:blue"
ADV_COLOR = "tab:orange"


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _mask_str(mask):
    return "" if mask is None else ";".join(str(int(i)) for i in mask)


# -- windows ---------------------------------------------------------------

def write_windows(path, windows):
    """``windows`` is a list of ``(window_id, role, values)``."""
    rows = []
    for wid, role, values in windows:
        rows.extend((wid, role, i, float(v)) for i, v in enumerate(values))
    write_csv(path, ["window_id", "role", "index", "value"], rows)


def read_windows(path) -> dict:
    """Return ``{role: {window_id: np.ndarray}}``."""
    out: dict = {}
    for row in read_csv(path):
        bucket = out.setdefault(row["role"], {}).setdefault(int(row["window_id"]), [])
        idx = int(row["index"])
        if idx != len(bucket):
            raise ValueError(f"{path}: window {row['window_id']} role {row['role']} out of order")
        bucket.append(float(row["value"]))
    return {role: {wid: np.array(v) for wid, v in ws.items()} for role, ws in out.items()}


# -- detection outputs -----------------------------------------------------

def write_verdicts(path, verdicts):
    write_csv(path, ["window_id", "score", "threshold", "adversarial"],
              [(v.window_id, v.score, v.threshold, int(v.adversarial)) for v in verdicts])


def read_verdicts(path):
    from ilid.detector import Verdict

    return [Verdict(int(r["window_id"]), float(r["score"]), float(r["threshold"]),
                    bool(int(r["adversarial"]))) for r in read_csv(path)]


def write_similarities(path, verdicts):
    rows = []
    for v in verdicts:
        ps = v.pair_scores
        rows.extend((v.window_id, i, j, s) for (i, j), s in zip(ps.pairs, ps.scores))
    write_csv(path, ["window_id", "pair_i", "pair_j", "score"], rows)


def write_attacks(path, rows):
    """``rows``: ``(window_id, method, epsilon, AttackResult)``."""
    write_csv(path, ["window_id", "method", "epsilon", "linf", "queries", "mask"],
              [(wid, m, eps, r.linf, r.queries, _mask_str(r.mask)) for wid, m, eps, r in rows])


def histogram_rows(clean_scores, adv_scores, threshold, bins=20):
    """Shared-edge histogram of both populations: one row per bin."""
    allv = np.concatenate([np.asarray(clean_scores, float), np.asarray(adv_scores, float), [threshold]])
    lo, hi = float(allv.min()), float(allv.max())
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    edges = np.linspace(lo, hi, bins + 1)
    c, _ = np.histogram(clean_scores, edges)
    a, _ = np.histogram(adv_scores, edges)
    return [(float(edges[i]), float(edges[i + 1]), int(c[i]), int(a[i]), float(threshold))
            for i in range(bins)]


def write_histogram(path, rows):
    write_csv(path, ["bin_left", "bin_right", "clean_count", "adv_count", "threshold"], rows)


def efficacy_table(rows) -> str:
    """Clean vs adversarial MAE / MSE / R^2, one line per method."""
    lines = [f"{'Attack':<8} {'Clean MAE':>9} {'MSE':>7} {'R2':>7} | {'AE MAE':>7} {'MSE':>7} {'R2':>7}"]
    for r in rows:
        lines.append(
            f"{r['method']:<8} {r['clean_mae']:>9.3f} {r['clean_mse']:>7.3f} {100 * r['clean_r2']:>6.1f}% | "
            f"{r['adv_mae']:>7.3f} {r['adv_mse']:>7.3f} {100 * r['adv_r2']:>6.1f}%"
        )
    return "\n".join(lines)


# -- figures ---------------------------------------------------------------

def _save(fig, path):
    # fixed metadata keeps PNG bytes reproducible
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)


def plot_histogram(path, rows, title="", threshold_label="threshold"):
    edges_l = np.array([r[0] for r in rows])
    edges_r = np.array([r[1] for r in rows])
    clean = np.array([r[2] for r in rows])
    adv = np.array([r[3] for r in rows])
    threshold = rows[0][4]
    width = edges_r - edges_l
    fig, ax = plt.subplots(figsize=(5, 3.4))
    ax.bar(edges_l, clean, width=width, align="edge", color=CLEAN_COLOR, alpha=0.7, label="clean")
    if adv.sum():
        ax.bar(edges_l, adv, width=width, align="edge", color=ADV_COLOR, alpha=0.7, label="adversarial")
    ax.axvline(threshold, color="k", ls="--", lw=1, label=f"{threshold_label} = {threshold:.3f}")
    ax.set_xlabel("similarity")
    ax.set_ylabel("count")
    if title:
        ax.set_title(title)
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    _save(fig, path)


def plot_threshold_trace(path, clean_verdicts, adv_verdicts):
    """Score of every judged window in stream order against the threshold in force."""
    stream = []
    for n in range(max(len(clean_verdicts), len(adv_verdicts))):
        if n < len(clean_verdicts):
            stream.append(("clean", clean_verdicts[n]))
        if n < len(adv_verdicts):
            stream.append(("adversarial", adv_verdicts[n]))
    fig, ax = plt.subplots(figsize=(6, 3.4))
    pos = np.arange(len(stream))
    for role, color in (("clean", CLEAN_COLOR), ("adversarial", ADV_COLOR)):
        sel = [k for k, (r, _) in enumerate(stream) if r == role]
        ax.scatter(pos[sel], [stream[k][1].score for k in sel], s=8, color=color, label=role)
    ax.step(pos, [v.threshold for _, v in stream], where="mid", color="k", lw=1, label="threshold")
    ax.set_xlabel("online sample")
    ax.set_ylabel("similarity")
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    _save(fig, path)
