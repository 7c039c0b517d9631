"""Command-line front end: ingest -> profile -> scenes -> graph -> train/evaluate -> report.

Every stage writes into a subdirectory of ``--out`` and prints one JSON
summary line on stdout. Later stages build missing upstream artifacts on
demand. Settings come from a ``key = value`` config file (``--config``, or
``<out>/scenecast.cfg`` when present) and flags override the file.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, gnn
from .config import RunConfig, derive_seed, read_config, write_config
from .errors import PipelineError
from .eval import (CityArtifacts, ExperimentPlan, SynthConfig, generate_synthetic_city, read_results,
                   run_experiment, summarize_results, write_charts)
from .graph import MobilityGraph, build_year_graph, get_scenario
from .ingest import (filter_fsas, load_census, load_codebook, load_dataset, load_fsa_centroids, venue_centroids,
                     write_census, write_codebook, write_dataset)
from .profiling import GroupModel, profile_users
from .scenes import SceneTable, score_city

log = logging.getLogger("scenecast")

STAGES = ("ingest", "profile", "scenes", "graph", "train", "evaluate", "report", "synth")
CONFIG_NAME = "scenecast.cfg"
# keys that determine the upstream data artifacts
DATA_KEYS = ("city", "venues", "reviews", "users", "census", "codebook", "centroids", "window", "seed",
             "topics_range", "k_range", "gibbs_iters", "min_venues")


class Context:
    def __init__(self, config: RunConfig):
        self.config = config
        self.out = Path(config.out)
        self.hash = config.hash()
        self.data_hash = _subset_hash(config, DATA_KEYS)

    def dir(self, stage: str) -> Path:
        d = self.out / stage
        d.mkdir(parents=True, exist_ok=True)
        return d

    def fresh(self, stage: str) -> bool:
        meta = self.out / stage / "meta.json"
        if not meta.exists():
            return False
        return json.loads(meta.read_text(encoding="utf-8")).get("data_hash") == self.data_hash

    def write_meta(self, stage: str, **extra) -> None:
        meta = {"stage": stage, "config_hash": self.hash, "data_hash": self.data_hash, "version": __version__,
                "written_at": time.strftime("%Y-%m-%dT%H:%M:%S%z"), **extra}
        (self.dir(stage) / "meta.json").write_text(json.dumps(meta, indent=1, sort_keys=True) + "\n",
                                                   encoding="utf-8")


def _subset_hash(config: RunConfig, keys) -> str:
    sub = RunConfig()
    for k in keys:
        setattr(sub, k, getattr(config, k))
    return sub.hash()


def _seed(ctx: Context, *stream) -> int:
    return derive_seed(ctx.config.seed, *stream) % (2**32)


# stages ----------------------------------------------------------------

def stage_ingest(ctx: Context) -> dict:
    c = ctx.config
    c.validate()
    cents = load_fsa_centroids(c.centroids) if c.centroids else None
    ds = load_dataset(c.venues, c.reviews, c.users, city=c.city or None, window=c.window, fsa_centroids=cents)
    raw = ds.counts()
    ds = filter_fsas(ds, c.min_venues)
    d = ctx.dir("ingest")
    write_dataset(ds, d)
    counts = {"raw": raw, "filtered": ds.counts(), "fsas": ds.fsas, "config_hash": ctx.hash}
    (d / "counts.json").write_text(json.dumps(counts, indent=1) + "\n", encoding="utf-8")
    ctx.write_meta("ingest")
    return {"fsas": len(ds.fsas), **{f"raw_{k}": v for k, v in raw.items()}}


def _dataset(ctx: Context):
    if not ctx.fresh("ingest"):
        stage_ingest(ctx)
    d = ctx.out / "ingest"
    return load_dataset(d / "venues.jsonl", d / "reviews.jsonl", d / "users.jsonl",
                        city=ctx.config.city or None, window=ctx.config.window)


def stage_profile(ctx: Context) -> dict:
    c = ctx.config
    ds = _dataset(ctx)
    prof = profile_users(ds, c.topics_range, c.k_range, seed=_seed(ctx, "profile"), iters=c.gibbs_iters)
    d = ctx.dir("profile")
    tm = prof.topic_model.to_dict()
    tm["config_hash"] = ctx.hash
    (d / "topic_model.json").write_text(json.dumps(tm) + "\n", encoding="utf-8")
    gm = prof.group_model.to_dict()
    gm["config_hash"] = ctx.hash
    (d / "groups.json").write_text(json.dumps(gm) + "\n", encoding="utf-8")
    for name, table, col in (("coherence.csv", prof.coherence, "topics"), ("silhouette.csv", prof.silhouettes, "k")):
        lines = [f"{col},score,config_hash"] + [f"{k},{v!r},{ctx.hash}" for k, v in sorted(table.items())]
        (d / name).write_text("\n".join(lines) + "\n", encoding="utf-8")
    ctx.write_meta("profile")
    return {"topics": prof.topic_model.K, "groups": prof.group_model.k}


def _groups(ctx: Context) -> GroupModel:
    if not ctx.fresh("profile"):
        stage_profile(ctx)
    return GroupModel.from_dict(json.loads((ctx.out / "profile" / "groups.json").read_text(encoding="utf-8")))


def stage_scenes(ctx: Context) -> dict:
    ds = _dataset(ctx)
    table = score_city(ds, load_codebook(ctx.config.codebook))
    table.to_csv(ctx.dir("scenes") / "scenes.csv", extra={"config_hash": ctx.hash})
    ctx.write_meta("scenes")
    return {"years": table.years, "fsas": len(ds.fsas)}


def _scenes(ctx: Context) -> SceneTable:
    if not ctx.fresh("scenes"):
        stage_scenes(ctx)
    return SceneTable.from_csv(ctx.out / "scenes" / "scenes.csv")


def stage_graph(ctx: Context) -> dict:
    ds = _dataset(ctx)
    groups = _groups(ctx)
    scenes = _scenes(ctx)
    census = load_census(ctx.config.census)
    d = ctx.dir("graphs")
    edges = {}
    lo, hi = ctx.config.window
    for y in range(lo, hi + 1):
        g = build_year_graph(ds, y, groups.assignment, census, scenes, n_groups=groups.k)
        rec = g.to_dict()
        rec["config_hash"] = ctx.hash
        (d / f"graph_{y}.json").write_text(json.dumps(rec) + "\n", encoding="utf-8")
        edges[y] = len(g.edges)
    ctx.write_meta("graphs")
    return {"edges": edges}


def _graphs(ctx: Context) -> dict[int, MobilityGraph]:
    if not ctx.fresh("graphs"):
        stage_graph(ctx)
    lo, hi = ctx.config.window
    return {y: MobilityGraph.load(ctx.out / "graphs" / f"graph_{y}.json") for y in range(lo, hi + 1)}


def _artifacts(ctx: Context) -> CityArtifacts:
    graphs = _graphs(ctx)
    scenes = _scenes(ctx)
    census = load_census(ctx.config.census)
    if ctx.config.centroids:
        cents = load_fsa_centroids(ctx.config.centroids)
    else:
        cents = venue_centroids(_dataset(ctx))
    fsas = next(iter(graphs.values())).vertices
    city = ctx.config.city or next(iter(graphs.values())).city
    return CityArtifacts(city, scenes, graphs, census, {f: cents[f] for f in fsas if f in cents})


def _slug(text: str) -> str:
    return "".join(ch if ch.isalnum() else "_" for ch in text.lower()).strip("_")


def stage_train(ctx: Context) -> dict:
    c = ctx.config
    art = _artifacts(ctx)
    written = []
    for name in c.scenarios:
        scenario = get_scenario(name)
        for test_year in c.test_years:
            train_years = [y for y in art.years if y < test_year]
            cfg = gnn.TrainConfig(epochs=c.epochs, lr=c.lr, dropout=c.dropout, hidden=c.hidden,
                                  seed=_seed(ctx, "train", scenario.name, test_year))
            res = gnn.train(art.graphs, art.scene_table, scenario, cfg, train_years=train_years)
            d = ctx.dir("train") / f"{_slug(scenario.name)}_{test_year}"
            d.mkdir(parents=True, exist_ok=True)
            gnn.save_checkpoint(res.model, d / "checkpoint.json", cfg, scenario=scenario.name,
                                test_year=test_year, config_hash=ctx.hash)
            res.write_trace(d / "trace.csv", {"config_hash": ctx.hash})
            written.append(str(d))
    ctx.write_meta("train")
    return {"runs": len(written)}


def stage_evaluate(ctx: Context) -> dict:
    c = ctx.config
    art = _artifacts(ctx)
    plan = ExperimentPlan([art.city], list(c.scenarios), list(c.test_years), c.reps, c.seed, list(c.models),
                          c.epochs, c.lr, c.dropout, c.hidden)
    report = run_experiment(plan, {art.city: art})
    report.write(ctx.dir("eval"), ctx.hash)
    ctx.write_meta("eval")
    return {"cells": len(report.results),
            "summary": {label: round(mean, 6) for _, label, mean, _ in report.summary()}}


def stage_report(ctx: Context) -> dict:
    results = ctx.out / "eval" / "results.csv"
    if not results.exists():
        stage_evaluate(ctx)
    rows = read_results(results)
    summary = summarize_results(rows)
    d = ctx.dir("report")
    lines = ["city,model_or_scenario,mean,ci95_half_width,config_hash"]
    lines += [",".join([_csv(city), _csv(label), repr(m), repr(h), ctx.hash]) for city, label, m, h in summary]
    (d / "summary.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    charts = write_charts(summary, d, ctx.hash)
    ctx.write_meta("report")
    return {"charts": [p.name for p in charts], "rows": len(summary)}


def _csv(text: str) -> str:
    return f'"{text}"' if ("," in text or '"' in text) else text


def stage_synth(ctx: Context, mode: str) -> dict:
    c = ctx.config
    scfg = SynthConfig(mode=mode)
    city = generate_synthetic_city(scfg, c.seed)
    d = ctx.dir("data")
    write_dataset(city.dataset, d)
    write_census(city.census, d / "census.csv")
    write_codebook(city.codebook.scores, d / "codebook.csv")
    with open(d / "centroids.csv", "w", encoding="utf-8") as fh:
        fh.write("fsa,latitude,longitude\n")
        for f, (lat, lon) in sorted(city.centroids.items()):
            fh.write(f"{f},{lat!r},{lon!r}\n")
    truth = {"mode": mode, "seed": c.seed, "drivers": city.drivers,
             "share": {str(y): v for y, v in city.share.items()}, "groups": city.groups}
    (d / "truth.json").write_text(json.dumps(truth, sort_keys=True) + "\n", encoding="utf-8")
    cfg = RunConfig(city=scfg.city, venues=str(d / "venues.jsonl"), reviews=str(d / "reviews.jsonl"),
                    users=str(d / "users.jsonl"), census=str(d / "census.csv"), codebook=str(d / "codebook.csv"),
                    centroids=str(d / "centroids.csv"), out=str(ctx.out), window=scfg.years,
                    test_years=[scfg.years[1]], reps=2, epochs=200, seed=c.seed, topics_range=(1, 4),
                    k_range=(2, 4), gibbs_iters=200, models=["gnn", "naive", "lasso"])
    write_config(cfg, ctx.out / CONFIG_NAME, relative_to=ctx.out)
    return {"mode": mode, "config": str(ctx.out / CONFIG_NAME), **city.dataset.counts()}


# argument handling -------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="scenecast", description=__doc__.splitlines()[0])
    p.add_argument("stage", choices=STAGES)
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--out", help="output directory (default: out)")
    p.add_argument("--seed", type=int, help="base seed")
    p.add_argument("--city")
    p.add_argument("--scenario", action="append", help="scenario name; repeatable")
    p.add_argument("--model", action="append", help="gnn | naive | lasso | forest | boosted; repeatable")
    p.add_argument("--test-year", type=int, action="append", help="repeatable")
    p.add_argument("--reps", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--k-range", help="group count range, e.g. 2:15")
    p.add_argument("--topics-range", help="topic count range, e.g. 1:30")
    p.add_argument("--mode", default="area_driven", help="synth only: area_driven | flow_driven | none")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    if args.config:
        cfg = read_config(args.config)
    else:
        default = Path(args.out or "out") / CONFIG_NAME
        if args.stage != "synth" and default.exists():
            cfg = read_config(default)
    if args.out:
        cfg.out = args.out
    for key in ("seed", "city", "reps", "epochs", "k_range", "topics_range"):
        value = getattr(args, key)
        if value is not None:
            cfg.set(key, value)
    if args.model:
        cfg.models = list(args.model)
    elif args.scenario:
        cfg.models = ["gnn"]
    if args.scenario:
        cfg.scenarios = [get_scenario(s).name for s in args.scenario]
    if args.test_year:
        cfg.test_years = list(args.test_year)
    return cfg


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = resolve_config(args)
        if args.stage != "synth":
            cfg.validate()
        ctx = Context(cfg)
        if args.stage == "synth":
            info = stage_synth(ctx, args.mode)
        else:
            info = globals()[f"stage_{args.stage}"](ctx)
    except (PipelineError, FileNotFoundError, FloatingPointError) as exc:
        print(f"scenecast {args.stage}: error: {exc}", file=sys.stderr)
        return 1
    print(json.dumps({"stage": args.stage, "status": "ok", "config_hash": ctx.hash, "out": str(ctx.out), **info},
                     sort_keys=True, default=_jsonable))
    return 0


def _jsonable(o):
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(type(o).__name__)


if __name__ == "__main__":
    sys.exit(main())
