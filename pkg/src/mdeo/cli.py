"""Command-line front end (``mdeo <subcommand>``).

Set ``MDEO_VERBOSITY`` to ``debug``, ``info`` (default), ``warning`` or
``error`` to control log output.
"""
from __future__ import annotations

import argparse
import csv
import logging
import os
import shutil
import sys
from pathlib import Path

import numpy as np

from . import alignment, config as cfgmod, embedding, evo, metrics, orchestrator, similarity
from .community import Partition, get_detector, write_partition_csv
from .datasets import BUILTIN, load_builtin, planted_partition
from .graph import apply_edits, has_identity_labels, load_edge_list, write_edge_list, write_node_labels
from .rng import substream

log = logging.getLogger("mdeo")


def _setup_logging():
    level = os.environ.get("MDEO_VERBOSITY", "info").upper()
    logging.basicConfig(level=getattr(logging, level, logging.INFO), format="%(levelname)s %(name)s: %(message)s")


def _names(paths, names):
    if names:
        if len(names) != len(paths):
            raise cfgmod.ConfigError("--names must match the number of edge lists")
        return names
    return [Path(p).stem for p in paths]


def _emit_labels(g, path, written: list) -> None:
    """Write the dense-id to input-label map when the two differ."""
    if not has_identity_labels(g):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        write_node_labels(g, path)
        written.append(path)


def _beside(out, suffix: str) -> Path:
    out = Path(out)
    return out.with_name(f"{out.stem}_{suffix}.csv")


# --- subcommands -----------------------------------------------------------

def cmd_similarity(a):
    graphs = [load_edge_list(p) for p in a.edges]
    names = _names(a.edges, a.names)
    sm = similarity.init_similarity_and_assisted(graphs, a.assisted)
    similarity.write_similarity_csv(sm.raw, names, a.out)
    if a.normalized:
        similarity.write_similarity_csv(sm.values, names, a.normalized)
    return [a.out] + ([a.normalized] if a.normalized else [])


def cmd_embed(a):
    g = load_edge_list(a.edges)
    p = get_detector(a.detector)(g)
    hyper = embedding.GaeHyper(a.hidden, a.embed_dim, a.epochs, a.lr, a.seed, a.optimizer)
    params, Z = embedding.train_gae(g, p, hyper)
    embedding.write_embeddings_csv(Z, a.out)
    out = [a.out]
    if a.params:
        embedding.save_params(params, a.params)
        out.append(a.params)
    _emit_labels(g, _beside(a.out, "node_ids"), out)
    return out


def cmd_align(a):
    gae = embedding.GaeHyper(epochs=a.gae_epochs, seed=a.seed, optimizer=a.optimizer)
    hyper = alignment.AlignHyper(epochs=a.epochs, lr=a.lr, seed=a.seed, automap_reduction=a.automap_reduction,
                                 anchor_ties=a.anchor_ties)
    out_dir = Path(a.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    ga = load_edge_list(a.source)
    if a.target:
        gb = load_edge_list(a.target)
    else:
        gb = ga.relabel(np.random.default_rng(a.seed).permutation(ga.node_count))
    pa, pb = similarity.CommunityProfile.build(ga), similarity.CommunityProfile.build(gb)
    _, aligned = similarity.profile_similarity(pa, pb)
    _, EA = embedding.train_gae(ga, pa.partition, gae)
    _, EB = embedding.train_gae(gb, pb.partition, gae)
    anchors = alignment.select_anchors(aligned, ga, gb, pa.partition, pb.partition, hyper.anchor_ties)
    ab, ba = alignment.train_alignment(EA, EB, anchors, hyper)
    written = [out_dir / "map_source_to_target.csv", out_dir / "map_target_to_source.csv", out_dir / "affine_maps.npz"]
    alignment.write_mapping_csv(alignment.node_mapping(ab, EA, EB), written[0])
    alignment.write_mapping_csv(alignment.node_mapping(ba, EB, EA), written[1])
    alignment.save_affine_maps({"source_to_target": ab, "target_to_source": ba}, written[2])
    _emit_labels(ga, out_dir / "source_node_ids.csv", written)
    if a.target:
        _emit_labels(gb, out_dir / "target_node_ids.csv", written)
    acc = alignment.self_alignment_accuracy(ga, gae, hyper, perm_seed=a.seed)
    print(f"self_alignment_accuracy={acc:.4f}")
    return written


def _load_run(a):
    cfg = cfgmod.load_config(a.config)
    if a.seed is not None:
        cfg = cfg.with_(seed=a.seed)
    if a.no_transfer:
        cfg = cfg.with_(transfer=cfgmod.TransferConfig(**{**cfgmod.to_dict(cfg)["transfer"], "enabled": False}))
    if a.out:
        cfg = cfg.with_(output=a.out)
    return cfg.validate()


def cmd_optimize(a):
    cfg = _load_run(a)
    graphs = [load_edge_list(n.path) for n in cfg.networks]
    if cfg.transfer.enabled:
        res = orchestrator.run_mdeo(graphs, cfg, threads=a.threads)
    else:
        res = orchestrator.run_sdeo(graphs, cfg)
    out = Path(cfg.output)
    written = orchestrator.write_outputs(res, out)
    cfgmod.save_config(cfg, out / "config.yaml")
    written.append(out / "config.yaml")
    for g, n in zip(graphs, cfg.networks):
        _emit_labels(g, out / "node_ids" / f"{n.name}.csv", written)
    for r in res.networks:
        log.info("%s: best fitness %.6f after %d generations", r.name, r.best_fitness, len(r.history) - 1)
    return written


def cmd_evaluate(a):
    g = load_edge_list(a.edges)
    det = get_detector(a.detector)
    parsed = evo.parse_edit_script(Path(a.solution).read_text().splitlines())
    if isinstance(parsed, list):
        raise cfgmod.ConfigError("evaluate expects an edge edit script, got seeds")
    base = det(g)
    after = det(apply_edits(g, parsed))
    rep = metrics.structural_report(g, parsed, det)
    name = a.name or Path(a.edges).stem
    print(f"nmi={metrics.nmi(base, after):.6f} ari={metrics.ari(base, after):.6f}")
    with Path(a.out).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([*metrics.REPORT_HEADER, "nmi", "ari"])
        w.writerow([name, *(repr(v) if isinstance(v, float) else v for v in rep.__dict__.values()),
                    repr(metrics.nmi(base, after)), repr(metrics.ari(base, after))])
    return [a.out]


def cmd_baseline(a):
    g = load_edge_list(a.edges)
    rng = substream(a.seed, f"baseline-{a.method}")
    if a.method == "ram":
        edits = evo.ram_baseline(g, a.beta, rng)
    else:
        edits = evo.dice_baseline(g, get_detector(a.detector)(g), a.beta, rng)
    Path(a.out).write_text("".join(line + "\n" for line in evo.edit_script_lines(edits)))
    written = [a.out]
    _emit_labels(g, _beside(a.out, "node_ids"), written)
    return written


def cmd_gen(a):
    out = Path(a.out)
    if a.builtin:
        write_edge_list(load_builtin(a.builtin), out)
        return [out]
    g, labels = planted_partition(a.groups, a.size, a.p_in, a.p_out, a.seed)
    write_edge_list(g, out)
    written = [out]
    if a.labels:
        write_partition_csv(Partition(labels), a.labels)
        written.append(Path(a.labels))
    return written


# --- parser ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mdeo", description="Many-network evolutionary community deception.")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("similarity", help="pairwise network similarity matrix")
    s.add_argument("edges", nargs="+")
    s.add_argument("--names", nargs="*")
    s.add_argument("--assisted", type=int, default=None)
    s.add_argument("--normalized", help="also write the assisted, row-normalised matrix here")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_similarity)

    s = sub.add_parser("embed", help="train a graph autoencoder and dump node embeddings")
    s.add_argument("edges")
    s.add_argument("--out", required=True)
    s.add_argument("--params")
    s.add_argument("--detector", default="greedy")
    s.add_argument("--hidden", type=int, default=32)
    s.add_argument("--embed-dim", type=int, default=16)
    s.add_argument("--epochs", type=int, default=300)
    s.add_argument("--lr", type=float, default=0.01)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--optimizer", choices=["gd", "adam"], default="gd")
    s.set_defaults(func=cmd_embed)

    s = sub.add_parser("align", help="train embedding maps between two networks")
    s.add_argument("source")
    s.add_argument("target", nargs="?", help="omit to align with a relabelled copy of source")
    s.add_argument("--out", required=True)
    s.add_argument("--epochs", type=int, default=500)
    s.add_argument("--lr", type=float, default=0.01)
    s.add_argument("--gae-epochs", type=int, default=300)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--optimizer", choices=["gd", "adam"], default="gd", help="GAE optimizer")
    s.add_argument("--automap-reduction", choices=["mean", "sum"], default="mean")
    s.add_argument("--anchor-ties", choices=["id", "structural"], default="id")
    s.set_defaults(func=cmd_align)

    s = sub.add_parser("optimize", help="run MDEO (or SDEO with --no-transfer)")
    s.add_argument("--config", required=True)
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--no-transfer", action="store_true")
    s.add_argument("--threads", type=int, default=1)
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_optimize)

    s = sub.add_parser("evaluate", help="NMI/ARI and structural report for an edit script")
    s.add_argument("edges")
    s.add_argument("solution")
    s.add_argument("--out", required=True)
    s.add_argument("--name")
    s.add_argument("--detector", default="greedy")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("baseline", help="RAM or DICE edit sets")
    s.add_argument("edges")
    s.add_argument("--method", choices=["ram", "dice"], required=True)
    s.add_argument("--beta", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--detector", default="greedy")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_baseline)

    s = sub.add_parser("gen", help="planted-partition generator or bundled network export")
    s.add_argument("--out", required=True)
    s.add_argument("--builtin", choices=BUILTIN)
    s.add_argument("--groups", type=int, default=4)
    s.add_argument("--size", type=int, default=30)
    s.add_argument("--p-in", type=float, default=0.25)
    s.add_argument("--p-out", type=float, default=0.02)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--labels")
    s.set_defaults(func=cmd_gen)
    return ap


def _cleanup(paths):
    for p in paths:
        p = Path(p)
        if p.is_dir():
            shutil.rmtree(p, ignore_errors=True)
        elif p.exists():
            p.unlink()


def _planned_outputs(a) -> list[Path]:
    """Outputs that did not exist before the run (removed again on failure)."""
    cands = []
    for attr in ("out", "params", "normalized", "labels"):
        v = getattr(a, attr, None)
        if v:
            cands.append(Path(v))
    return [p for p in cands if not p.exists()]


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    fresh = _planned_outputs(args)
    if args.command == "optimize" and args.out is None:
        try:
            out = Path(cfgmod.load_config(args.config).output)
            if not out.exists():
                fresh.append(out)
        except Exception:  # reported below by the command itself
            pass
    if getattr(args, "threads", 1) < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 2
    try:
        args.func(args)
    except (cfgmod.ConfigError, ValueError, FileNotFoundError, OSError) as exc:
        _cleanup(fresh)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except BaseException:
        _cleanup(fresh)
        raise
    return 0


if __name__ == "__main__":
    sys.exit(main())
