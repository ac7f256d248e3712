"""Command line entry point wiring the whole pipeline.

Every numeric constant used by a stage is surfaced as an option or a
config key with its documented default (cosine 0.9, levenshtein 3, jaccard
0.3, alpha 0.6, beam 4, max_len 512, fusion lambda 1.0).  The ``run``
command executes the standard stage chain from a single TOML/JSON config,
writing artifacts atomically and logging a content digest per stage.
"""

from __future__ import annotations

import hashlib
import json
import os
import random
import sys
from dataclasses import dataclass, field

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path

import click

from . import bpe, corpus as corpus_mod, decoding, distractors as distractors_mod
from . import encoding, entities as entities_mod, metrics as metrics_mod
from . import plots, profiles as profiles_mod, sentiment as sentiment_mod, synth
from .errors import ConfigError, DlgkitError, StageError


def _write_atomic(path: Path, text: str) -> str:
    """Write via a temp file + rename; returns the content digest."""
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def _digest_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()[:16]


def _load_matches(path: str, corpus) -> dict:
    doc = json.loads(Path(path).read_text())
    return entities_mod.matches_from_doc(doc, corpus.entities)


def _dialogue_targets(dlg, corpus) -> list:
    ids = sorted(dlg.profile_entity_ids())
    return [corpus.entities[eid] for eid in ids if eid in corpus.entities]


def _resolve_corpus(corpus, config=None) -> dict:
    out = {}
    for dlg in corpus.dialogues:
        targets = _dialogue_targets(dlg, corpus)
        out[dlg.id] = entities_mod.resolve(dlg, targets, config=config) \
            if targets else []
    return out


@click.group()
def main():
    """Grounded dialogue corpus toolkit."""


# ---------------------------------------------------------------------------
# corpus commands
# ---------------------------------------------------------------------------


@main.command()
@click.argument("corpus_path", type=click.Path(exists=True))
@click.option("--out", type=click.Path(), help="re-serialize to a canonical file")
def ingest(corpus_path, out):
    """Validate a corpus file and print a summary."""
    c = corpus_mod.ingest(corpus_path)
    click.echo(f"ok: {len(c.dialogues)} dialogues, "
               f"{len(c.movie_ids())} movies, {len(c.entities)} entities")
    if out:
        corpus_mod.serialize(c, out)
        click.echo(f"wrote {out} [{_digest_file(Path(out))}]")


@main.command()
@click.argument("corpus_path", type=click.Path(exists=True))
@click.option("--report", type=click.Path(), help="write CSV + figures here")
def stats(corpus_path, report):
    """Table-style corpus statistics."""
    c = corpus_mod.ingest(corpus_path)
    st = corpus_mod.compute_stats(c)
    click.echo(json.dumps(st.to_dict(), indent=2))
    if report:
        for p in plots.render_stats(st, report):
            click.echo(f"wrote {p}")


@main.command()
@click.argument("corpus_path", type=click.Path(exists=True))
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--fractions", default="0.8,0.1,0.1", show_default=True)
@click.option("--out", type=click.Path())
@click.option("--report", type=click.Path())
def split(corpus_path, seed, fractions, out, report):
    """Movie-disjoint train/valid/test assignment."""
    fracs = tuple(float(x) for x in fractions.split(","))
    if len(fracs) != 3:
        raise click.UsageError("--fractions needs three comma-separated values")
    c = corpus_mod.ingest(corpus_path)
    assignment = corpus_mod.split_by_movie(c, fracs, seed)
    doc = assignment.to_dict()
    if out:
        _write_atomic(Path(out), json.dumps(doc, indent=1))
        click.echo(f"wrote {out}")
    else:
        click.echo(json.dumps(doc, indent=1))
    if report:
        for p in plots.render_split(assignment, c, report):
            click.echo(f"wrote {p}")


@main.command("gen-profiles")
@click.option("--movie-kb", "kb_path", required=True, type=click.Path(exists=True))
@click.option("--relation", type=click.Choice([r.value for r in profiles_mod.ProfileRelation]),
              default="compatible", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--count", type=int, default=1, show_default=True)
@click.option("--movie", "movie_id", default=None, help="movie id; default cycles all")
@click.option("--out", type=click.Path())
def gen_profiles(kb_path, relation, seed, count, movie_id, out):
    """Generate constrained profile pairs from a knowledge base."""
    kb = profiles_mod.KnowledgeBase.load(kb_path)
    gen = profiles_mod.ProfileGenerator(kb, seed=seed)
    rel = profiles_mod.ProfileRelation(relation)
    movie_ids = [movie_id] * count if movie_id else \
        [sorted(kb.movies)[i % len(kb.movies)] for i in range(count)]
    pairs = []
    for mid in movie_ids:
        pair = gen.generate_pair(mid, rel)
        pairs.append({"movie_id": mid, "relation": pair.relation.value,
                      "profile_a": pair.profile_a.to_dict(),
                      "profile_b": pair.profile_b.to_dict()})
    text = json.dumps(pairs, indent=1)
    if out:
        _write_atomic(Path(out), text)
        click.echo(f"wrote {out}")
    else:
        click.echo(text)


# ---------------------------------------------------------------------------
# validation commands
# ---------------------------------------------------------------------------


@main.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--cosine-threshold", type=float, default=0.9, show_default=True)
@click.option("--levenshtein-max", type=int, default=3, show_default=True)
@click.option("--jaccard-max", type=float, default=0.3, show_default=True)
def resolve(corpus_path, out, cosine_threshold, levenshtein_max, jaccard_max):
    """Resolve profile entity mentions in every dialogue."""
    cfg = entities_mod.ResolverConfig(cosine_threshold, levenshtein_max, jaccard_max)
    cfg.validate()
    c = corpus_mod.ingest(corpus_path)
    matches = _resolve_corpus(c, cfg)
    n = sum(len(v) for v in matches.values())
    _write_atomic(Path(out), json.dumps(entities_mod.matches_to_doc(matches)))
    click.echo(f"wrote {out} ({n} matches)")


@main.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--matches", "matches_path", required=True, type=click.Path(exists=True))
@click.option("--report", type=click.Path())
def coverage(corpus_path, matches_path, report):
    """Mean fraction of profile entities mentioned per dialogue."""
    c = corpus_mod.ingest(corpus_path)
    matches = _load_matches(matches_path, c)
    rep = entities_mod.coverage(c, matches)
    click.echo(json.dumps({"mean_coverage": rep.mean_coverage,
                           "dialogues": len(rep.per_dialogue),
                           "skipped": rep.skipped}, indent=2))
    if report:
        for p in plots.render_coverage(rep, report):
            click.echo(f"wrote {p}")


@main.command("eval-ner")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--matches", "matches_path", required=True, type=click.Path(exists=True))
@click.option("--gold", "gold_path", required=True, type=click.Path(exists=True))
def eval_ner(corpus_path, matches_path, gold_path):
    """Precision/recall/f1 of resolved matches against gold annotations.

    Gold format: {"<dialogue_id>": [{"entity_id", "utterance_index",
    "span"}, ...], ...}
    """
    c = corpus_mod.ingest(corpus_path)
    predicted = _load_matches(matches_path, c)
    gold = _load_matches(gold_path, c)
    p, r, f1 = entities_mod.evaluate_ner_corpus(predicted, gold)
    click.echo(json.dumps({"precision": p, "recall": r, "f1": f1}, indent=2))


@main.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--matches", "matches_path", required=True, type=click.Path(exists=True))
@click.option("--annotator", type=click.Choice(["default"]), default="default",
              show_default=True)
@click.option("--labeled-out", type=click.Path(),
              help="also write the sentiment-labeled corpus here")
@click.option("--report", type=click.Path())
def adherence(corpus_path, matches_path, annotator, labeled_out, report):
    """Check expressed sentiments against the scripted profile opinions."""
    c = corpus_mod.ingest(corpus_path)
    matches = _load_matches(matches_path, c)
    rep = sentiment_mod.check_adherence(c, matches)
    click.echo(json.dumps(rep.to_dict(), indent=2))
    if labeled_out:
        labeled = sentiment_mod.emit_sentiment_labels(c, matches)
        corpus_mod.serialize(labeled, labeled_out)
        click.echo(f"wrote {labeled_out}")
    if report:
        for p in plots.render_adherence(rep, report):
            click.echo(f"wrote {p}")


# ---------------------------------------------------------------------------
# encoding / distractors
# ---------------------------------------------------------------------------


@main.command("train-tok")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--merges", type=int, default=500, show_default=True)
@click.option("--out", required=True, type=click.Path())
@click.option("--limit-chars", type=int, default=200_000, show_default=True)
def train_tok(corpus_path, merges, out, limit_chars):
    """Train the byte pair encoding tokenizer on corpus text."""
    c = corpus_mod.ingest(corpus_path)
    chunks = []
    size = 0
    for dlg in c.dialogues:
        for u in dlg.utterances:
            chunks.append(u.text)
            size += len(u.text)
        if size >= limit_chars:
            break
    tok = bpe.BPETokenizer()
    tok.train("\n".join(chunks), merges)
    tok.save(out)
    click.echo(f"wrote {out} (vocab {tok.vocab_size})")


@main.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--tok", "tok_path", required=True, type=click.Path(exists=True))
@click.option("--matches", "matches_path", type=click.Path(exists=True),
              help="entity matches for delexicalisation")
@click.option("--max-len", type=int, default=512, show_default=True)
@click.option("--positions", type=click.Choice(["restart", "continuous"]),
              default="restart", show_default=True)
@click.option("--limit", type=int, default=0, help="max samples (0 = all)")
@click.option("--out", required=True, type=click.Path())
def encode(corpus_path, tok_path, matches_path, max_len, positions, limit, out):
    """Encode next-utterance samples into the binary sample format."""
    c = corpus_mod.ingest(corpus_path)
    tok = bpe.BPETokenizer.load(tok_path)
    matches = _load_matches(matches_path, c) if matches_path else {}
    samples = []
    for dlg in c.dialogues:
        if matches.get(dlg.id):
            dlg, _ = encoding.delexicalise(dlg, matches[dlg.id])
        for i in range(1, len(dlg.utterances)):
            profile = dlg.profile_for(dlg.utterances[i].speaker)
            try:
                samples.append(encoding.build_sample(
                    profile, list(dlg.utterances[:i]), dlg.utterances[i],
                    tok, max_len=max_len, positions=positions))
            except DlgkitError:
                continue  # over-budget grounding; skip the sample
            if limit and len(samples) >= limit:
                break
        if limit and len(samples) >= limit:
            break
    encoding.write_samples(out, samples, max_len=max_len)
    click.echo(f"wrote {out} ({len(samples)} samples) "
               f"[{_digest_file(Path(out))}]")


@main.command("distractors")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True),
              help="sentiment-labeled corpus")
@click.option("--mode", type=click.Choice(["random", "rule"]), default="random",
              show_default=True)
@click.option("--k", type=int, default=3, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path())
@click.option("--report", type=click.Path())
def distractors_cmd(corpus_path, mode, k, seed, out, report):
    """Draw distractor utterances for every next-utterance sample."""
    c = corpus_mod.ingest(corpus_path)
    pool = distractors_mod.DistractorPool.build(c)
    rng = random.Random(seed)
    draws = {}
    tier_counts: dict[int, int] = {}
    for dlg in c.dialogues:
        for utt in dlg.utterances[1:]:
            if mode == "rule":
                draw = distractors_mod.rule_based_distractors(
                    pool, dlg.movie_id, dlg.id, utt.sentiment_labels, k, rng,
                    exclude_text=utt.text)
            else:
                draw = distractors_mod.random_distractors(
                    pool, dlg.movie_id, dlg.id, k, rng, exclude_text=utt.text)
            draws[f"{dlg.id}:{utt.index}"] = {
                "texts": draw.texts, "tiers": draw.tiers,
                "cross_movie_fallback": draw.cross_movie_fallback}
            for t in draw.tiers:
                tier_counts[t] = tier_counts.get(t, 0) + 1
    text = json.dumps(draws)
    if out:
        _write_atomic(Path(out), text)
        click.echo(f"wrote {out}")
    click.echo(json.dumps({"tier_histogram": tier_counts}, indent=2))
    if report:
        for p in plots.render_tier_histogram(tier_counts, report):
            click.echo(f"wrote {p}")


# ---------------------------------------------------------------------------
# decoding / evaluation
# ---------------------------------------------------------------------------


def _eval_items(c, assignment_split=None):
    items = []
    for dlg in c.dialogues:
        last = dlg.utterances[-1]
        items.append(metrics_mod.EvalItem(
            profile=dlg.profile_for(last.speaker),
            history=list(dlg.utterances[:-1]),
            gold=last, movie_id=dlg.movie_id, dialogue_id=dlg.id))
    return items


@main.command()
@click.option("--scorer-cmd", required=True, help="command speaking the JSON-lines protocol")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--tok", "tok_path", required=True, type=click.Path(exists=True))
@click.option("--dialogue", "dialogue_id", required=True)
@click.option("--beam", type=int, default=4, show_default=True)
@click.option("--alpha", type=float, default=0.6, show_default=True)
@click.option("--lambda", "fusion_weight", type=float, default=1.0, show_default=True)
@click.option("--max-new", type=int, default=16, show_default=True)
def decode(scorer_cmd, corpus_path, tok_path, dialogue_id, beam, alpha,
           fusion_weight, max_new):
    """Beam-decode the next utterance for one dialogue's history."""
    c = corpus_mod.ingest(corpus_path)
    tok = bpe.BPETokenizer.load(tok_path)
    dlg = c.get(dialogue_id)
    last = dlg.utterances[-1]
    full = encoding.build_sample(
        dlg.profile_for(last.speaker), list(dlg.utterances[:-1]), last, tok,
        pad=False)
    # Generation continues the grounding + history; drop the gold utterance
    # (the lm-masked region) and the classification token from the prefix.
    cut = next(i for i, m in enumerate(full.lm_mask) if m)
    prefix = encoding.EncodedSample(
        token_ids=full.token_ids[:cut], content_ids=full.content_ids[:cut],
        position_ids=full.position_ids[:cut], lm_mask=full.lm_mask[:cut],
        clf_index=0)
    with decoding.SubprocessScorer(scorer_cmd) as scorer:
        hyps = decoding.beam_search(prefix, scorer, beam=beam, alpha=alpha,
                                    max_len=max_new)
        choice = decoding.select_final(hyps, scorer, prefix, tok.clf_id,
                                       fusion_weight)
    click.echo(json.dumps({
        "tokens": choice.hypothesis.tokens,
        "text": tok.decode(choice.hypothesis.tokens),
        "normalized_score": choice.hypothesis.normalized_score,
        "fused_score": choice.fused_score,
        "classifier_used": choice.classifier_used,
    }, indent=2))


@main.command("eval")
@click.option("--scorer-cmd", required=True)
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--tok", "tok_path", required=True, type=click.Path(exists=True))
@click.option("--hits", default="1,3", show_default=True)
@click.option("--distractors", "distractor_count", type=int, default=19,
              show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--limit", type=int, default=0)
@click.option("--report", type=click.Path())
def eval_cmd(scorer_cmd, corpus_path, tok_path, hits, distractor_count, seed,
             limit, report):
    """Perplexity and hits@n against a wire scorer."""
    c = corpus_mod.ingest(corpus_path)
    tok = bpe.BPETokenizer.load(tok_path)
    ns = tuple(int(x) for x in hits.split(","))
    pool = distractors_mod.DistractorPool.build(c)
    items = _eval_items(c)
    if limit:
        items = items[:limit]
    with decoding.SubprocessScorer(scorer_cmd) as scorer:
        rep = metrics_mod.evaluate(items, pool, scorer, tok, ns=ns,
                                   distractor_count=distractor_count, seed=seed)
    click.echo(json.dumps(rep.to_dict(), indent=2))
    if report:
        for p in plots.render_eval(rep, report):
            click.echo(f"wrote {p}")


# ---------------------------------------------------------------------------
# synthetic data
# ---------------------------------------------------------------------------


@main.command("synth-kb")
@click.option("--movies", type=int, default=20, show_default=True)
@click.option("--trivia-per-movie", type=int, default=24, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", required=True, type=click.Path())
def synth_kb(movies, trivia_per_movie, seed, out):
    """Write a synthetic knowledge base fixture."""
    kb = synth.make_kb(movies, seed=seed, trivia_per_movie=trivia_per_movie)
    kb.dump(out)
    click.echo(f"wrote {out} ({movies} movies)")


@main.command("synth-corpus")
@click.option("--movies", type=int, default=20, show_default=True)
@click.option("--dialogues", type=int, default=50, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--full-scale", is_flag=True,
              help="headline-statistics stand-in (7,519 dialogues, 500 movies)")
@click.option("--out", required=True, type=click.Path())
@click.option("--gold-out", type=click.Path(),
              help="also write the generator's gold entity matches")
def synth_corpus(movies, dialogues, seed, full_scale, out, gold_out):
    """Generate a synthetic grounded-dialogue corpus with known ground truth."""
    if full_scale:
        c, truth = synth.full_scale_corpus(seed=seed or 2024)
    else:
        kb = synth.make_kb(movies, seed=seed,
                           trivia_per_movie=max(24, 10 * dialogues // movies))
        c, truth = synth.generate_corpus(kb, dialogues, seed=seed)
    corpus_mod.serialize(c, out)
    click.echo(f"wrote {out} ({len(c.dialogues)} dialogues, "
               f"true coverage {truth.mean_coverage:.3f})")
    if gold_out:
        _write_atomic(Path(gold_out),
                      json.dumps(entities_mod.matches_to_doc(truth.gold_matches)))
        click.echo(f"wrote {gold_out}")


# ---------------------------------------------------------------------------
# pipeline runner
# ---------------------------------------------------------------------------


@dataclass
class PipelineConfig:
    corpus: str
    out_dir: str
    seed: int = 0
    cosine_threshold: float = 0.9
    levenshtein_max: int = 3
    jaccard_max: float = 0.3
    alpha: float = 0.6
    beam: int = 4
    max_len: int = 512
    fusion_weight: float = 1.0
    bpe_merges: int = 200
    distractor_mode: str = "random"
    distractor_k: int = 3
    fractions: tuple[float, float, float] = (0.8, 0.1, 0.1)
    annotator: str = "default"
    scorer_cmd: str | None = None
    extra: dict = field(default_factory=dict)

    @classmethod
    def load(cls, path: str | Path) -> "PipelineConfig":
        path = Path(path)
        if path.suffix == ".json":
            doc = json.loads(path.read_text())
        else:
            doc = tomllib.loads(path.read_text())
        known = {f for f in cls.__dataclass_fields__ if f != "extra"}
        kwargs = {k: v for k, v in doc.items() if k in known}
        extra = {k: v for k, v in doc.items() if k not in known}
        if "fractions" in kwargs:
            kwargs["fractions"] = tuple(kwargs["fractions"])
        for req in ("corpus", "out_dir"):
            if req not in kwargs:
                raise ConfigError(f"config missing required key {req!r}")
        cfg = cls(extra=extra, **kwargs)
        cfg.validate()
        return cfg

    def validate(self):
        if not 0.0 < self.cosine_threshold <= 1.0:
            raise ConfigError(f"cosine_threshold {self.cosine_threshold} outside (0, 1]")
        if self.levenshtein_max < 0:
            raise ConfigError("levenshtein_max must be >= 0")
        if not 0.0 <= self.jaccard_max <= 1.0:
            raise ConfigError(f"jaccard_max {self.jaccard_max} outside [0, 1]")
        if self.alpha < 0:
            raise ConfigError("alpha must be >= 0")
        if self.beam < 1:
            raise ConfigError("beam must be >= 1")
        if not 1 <= self.max_len <= 512:
            raise ConfigError(f"max_len {self.max_len} outside [1, 512]")
        if abs(sum(self.fractions) - 1.0) > 1e-9:
            raise ConfigError(f"fractions {self.fractions} do not sum to 1")
        if self.distractor_mode not in ("random", "rule"):
            raise ConfigError(f"unknown distractor_mode {self.distractor_mode!r}")


def _pipeline_stages(cfg: PipelineConfig):
    """Ordered (name, artifact names) plan for the standard chain."""
    return [
        ("ingest", ["corpus.json"]),
        ("split", ["split.json"]),
        ("resolve", ["matches.json"]),
        ("adherence", ["adherence.json", "labeled.json"]),
        ("train-tok", ["bpe.json"]),
        ("encode", ["samples.bin", "samples.bin.json"]),
        ("distractors", ["distractors.json"]),
    ]


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--dry-run", is_flag=True)
def run(config_path, dry_run):
    """Run the full pipeline described by a config file."""
    cfg = PipelineConfig.load(config_path)
    out_dir = Path(cfg.out_dir)
    plan = _pipeline_stages(cfg)
    if dry_run:
        click.echo("plan:")
        for name, artifacts in plan:
            click.echo(f"  {name}: {', '.join(artifacts)}")
        return

    out_dir.mkdir(parents=True, exist_ok=True)
    state: dict = {}

    def stage(name):
        def wrap(fn):
            try:
                digests = fn()
            except Exception as exc:
                raise StageError(name, exc) from exc
            for artifact, digest in digests.items():
                click.echo(f"[{name}] {artifact} {digest}")
        return wrap

    @stage("ingest")
    def _ingest():
        state["corpus"] = corpus_mod.ingest(cfg.corpus)
        corpus_mod.serialize(state["corpus"], out_dir / "corpus.json")
        return {"corpus.json": _digest_file(out_dir / "corpus.json")}

    @stage("split")
    def _split():
        assignment = corpus_mod.split_by_movie(state["corpus"], cfg.fractions,
                                               cfg.seed)
        d = _write_atomic(out_dir / "split.json",
                          json.dumps(assignment.to_dict(), indent=1))
        return {"split.json": d}

    @stage("resolve")
    def _resolve():
        rcfg = entities_mod.ResolverConfig(cfg.cosine_threshold,
                                           cfg.levenshtein_max, cfg.jaccard_max)
        state["matches"] = _resolve_corpus(state["corpus"], rcfg)
        d = _write_atomic(out_dir / "matches.json",
                          json.dumps(entities_mod.matches_to_doc(state["matches"])))
        return {"matches.json": d}

    @stage("adherence")
    def _adherence():
        rep = sentiment_mod.check_adherence(state["corpus"], state["matches"])
        d1 = _write_atomic(out_dir / "adherence.json",
                           json.dumps(rep.to_dict(), indent=1))
        state["labeled"] = sentiment_mod.emit_sentiment_labels(
            state["corpus"], state["matches"])
        corpus_mod.serialize(state["labeled"], out_dir / "labeled.json")
        return {"adherence.json": d1,
                "labeled.json": _digest_file(out_dir / "labeled.json")}

    @stage("train-tok")
    def _train_tok():
        text = "\n".join(u.text for dlg in state["corpus"].dialogues
                         for u in dlg.utterances)
        tok = bpe.BPETokenizer()
        tok.train(text[:200_000], cfg.bpe_merges)
        tok.save(out_dir / "bpe.json")
        state["tok"] = tok
        return {"bpe.json": _digest_file(out_dir / "bpe.json")}

    @stage("encode")
    def _encode():
        samples = []
        for dlg in state["corpus"].dialogues:
            if state["matches"].get(dlg.id):
                try:
                    dlg, _ = encoding.delexicalise(dlg, state["matches"][dlg.id])
                except DlgkitError:
                    pass  # multi-movie dialogues keep their surface forms
            for i in range(1, len(dlg.utterances)):
                profile = dlg.profile_for(dlg.utterances[i].speaker)
                try:
                    samples.append(encoding.build_sample(
                        profile, list(dlg.utterances[:i]), dlg.utterances[i],
                        state["tok"], max_len=cfg.max_len))
                except DlgkitError:
                    continue
        encoding.write_samples(out_dir / "samples.bin", samples,
                               max_len=cfg.max_len)
        return {"samples.bin": _digest_file(out_dir / "samples.bin"),
                "samples.bin.json": _digest_file(out_dir / "samples.bin.json")}

    @stage("distractors")
    def _distractors():
        pool = distractors_mod.DistractorPool.build(state["labeled"])
        rng = random.Random(cfg.seed)
        draws = {}
        for dlg in state["labeled"].dialogues:
            for utt in dlg.utterances[1:]:
                if cfg.distractor_mode == "rule":
                    draw = distractors_mod.rule_based_distractors(
                        pool, dlg.movie_id, dlg.id, utt.sentiment_labels,
                        cfg.distractor_k, rng, exclude_text=utt.text)
                else:
                    draw = distractors_mod.random_distractors(
                        pool, dlg.movie_id, dlg.id, cfg.distractor_k, rng,
                        exclude_text=utt.text)
                draws[f"{dlg.id}:{utt.index}"] = {"texts": draw.texts,
                                                  "tiers": draw.tiers}
        d = _write_atomic(out_dir / "distractors.json", json.dumps(draws))
        return {"distractors.json": d}

    click.echo("done")


def entrypoint():  # pragma: no cover
    try:
        main()
    except StageError as exc:
        click.echo(str(exc), err=True)
        sys.exit(2)
    except DlgkitError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)


if __name__ == "__main__":
    entrypoint()
