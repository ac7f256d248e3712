"""Report rendering: matplotlib figures next to delimited output files.

Every ``render_*`` helper writes a CSV/TSV with the underlying numbers and
a PNG figure into the same directory, and returns the written paths.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .corpus import Corpus, CorpusStats, Split, SplitAssignment  # noqa: E402
from .entities import CoverageReport  # noqa: E402
from .metrics import EvalReport  # noqa: E402
from .sentiment import AdherenceReport  # noqa: E402


def _ensure(outdir: str | Path) -> Path:
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def render_stats(stats: CorpusStats, outdir: str | Path) -> list[Path]:
    out = _ensure(outdir)
    csv_path = out / "stats.csv"
    with csv_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["parameter", "value"])
        for key, value in stats.to_dict().items():
            writer.writerow([key, value])

    paths = [csv_path]
    if stats.token_frequencies:
        counts = [c for _, c in stats.token_frequencies]
        total = sum(counts)
        cumulative = []
        acc = 0
        for c in counts:
            acc += c
            cumulative.append(acc / total)
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(range(1, len(cumulative) + 1), cumulative)
        ax.axhline(0.99, color="grey", linestyle="--", linewidth=0.8)
        ax.axvline(stats.vocab_size_99, color="grey", linestyle="--",
                   linewidth=0.8)
        ax.set_xscale("log")
        ax.set_xlabel("vocabulary rank (most frequent first)")
        ax.set_ylabel("cumulative token coverage")
        ax.set_title(f"{stats.vocab_size_99:,} types cover 99% of "
                     f"{stats.tokens:,} tokens")
        fig.tight_layout()
        fig_path = out / "vocab_coverage.png"
        fig.savefig(fig_path, dpi=150)
        plt.close(fig)
        paths.append(fig_path)
    return paths


def render_split(assignment: SplitAssignment, corpus: Corpus,
                 outdir: str | Path) -> list[Path]:
    out = _ensure(outdir)
    by_movie = corpus.by_movie()
    counts = {s: 0 for s in Split}
    for movie, split in assignment.assignment.items():
        counts[split] += len(by_movie.get(movie, ()))
    total = sum(counts.values())

    csv_path = out / "split.csv"
    with csv_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["split", "movies", "dialogues", "fraction"])
        for s in Split:
            writer.writerow([s.value, len(assignment.movies(s)), counts[s],
                             counts[s] / total if total else 0.0])

    fig, ax = plt.subplots(figsize=(5, 4))
    ax.bar([s.value for s in Split], [counts[s] / total for s in Split])
    ax.set_ylabel("dialogue fraction")
    ax.set_title("movie-disjoint split")
    fig.tight_layout()
    fig_path = out / "split.png"
    fig.savefig(fig_path, dpi=150)
    plt.close(fig)
    return [csv_path, fig_path]


def render_coverage(report: CoverageReport, outdir: str | Path) -> list[Path]:
    out = _ensure(outdir)
    csv_path = out / "coverage.csv"
    with csv_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["dialogue_id", "coverage"])
        for did, value in sorted(report.per_dialogue.items()):
            writer.writerow([did, value])

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.hist(list(report.per_dialogue.values()), bins=20, range=(0, 1))
    ax.axvline(report.mean_coverage, color="red", linestyle="--",
               label=f"mean {report.mean_coverage:.3f}")
    ax.set_xlabel("profile entity coverage per dialogue")
    ax.set_ylabel("dialogues")
    ax.legend()
    fig.tight_layout()
    fig_path = out / "coverage.png"
    fig.savefig(fig_path, dpi=150)
    plt.close(fig)
    return [csv_path, fig_path]


def render_adherence(report: AdherenceReport, outdir: str | Path) -> list[Path]:
    out = _ensure(outdir)
    csv_path = out / "adherence.csv"
    kinds = sorted(report.by_kind)
    with csv_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["entity", "matches", "errors", "neutral", "accuracy",
                         "accuracy_with_neutral"])
        for kind in kinds:
            t = report.by_kind[kind]
            writer.writerow([kind, t.matches, t.errors, t.neutral,
                             t.accuracy, t.accuracy_with_neutral])
        t = report.total
        writer.writerow(["sum", t.matches, t.errors, t.neutral, t.accuracy,
                         t.accuracy_with_neutral])

    fig, ax = plt.subplots(figsize=(6, 4))
    x = range(len(kinds))
    width = 0.27
    for i, (name, getter) in enumerate(
            (("matches", lambda t: t.matches), ("errors", lambda t: t.errors),
             ("neutral", lambda t: t.neutral))):
        ax.bar([xi + (i - 1) * width for xi in x],
               [getter(report.by_kind[k]) for k in kinds],
               width=width, label=name)
    ax.set_xticks(list(x))
    ax.set_xticklabels(kinds)
    ax.set_ylabel("clause units")
    ax.legend()
    fig.tight_layout()
    fig_path = out / "adherence.png"
    fig.savefig(fig_path, dpi=150)
    plt.close(fig)
    return [csv_path, fig_path]


def render_eval(report: EvalReport, outdir: str | Path) -> list[Path]:
    out = _ensure(outdir)
    csv_path = out / "eval.csv"
    with csv_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "value"])
        writer.writerow(["perplexity", report.perplexity])
        for n, rate in sorted(report.hits_at.items()):
            writer.writerow([f"hits@{n}", rate])
        writer.writerow(["n_samples", report.n_samples])

    fig, ax = plt.subplots(figsize=(5, 4))
    ns = sorted(report.hits_at)
    ax.bar([f"hits@{n}" for n in ns], [report.hits_at[n] for n in ns])
    ax.set_ylim(0, 1)
    ax.set_title(f"perplexity {report.perplexity:.2f} "
                 f"({report.n_samples} samples)")
    fig.tight_layout()
    fig_path = out / "eval.png"
    fig.savefig(fig_path, dpi=150)
    plt.close(fig)
    return [csv_path, fig_path]


def render_tier_histogram(tier_counts: dict[int, int],
                          outdir: str | Path) -> list[Path]:
    out = _ensure(outdir)
    csv_path = out / "distractor_tiers.csv"
    with csv_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["tier", "count"])
        for tier in sorted(tier_counts):
            writer.writerow([tier, tier_counts[tier]])

    fig, ax = plt.subplots(figsize=(5, 4))
    tiers = sorted(tier_counts)
    ax.bar([str(t) for t in tiers], [tier_counts[t] for t in tiers])
    ax.set_xlabel("distractor tier (1 = entity + different sentiment)")
    ax.set_ylabel("draws")
    fig.tight_layout()
    fig_path = out / "distractor_tiers.png"
    fig.savefig(fig_path, dpi=150)
    plt.close(fig)
    return [csv_path, fig_path]
