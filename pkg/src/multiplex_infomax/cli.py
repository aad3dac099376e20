"""Command-line entry point: generate / train / evaluate.

Every command writes a manifest recording the fully resolved configuration,
a digest of its inputs, the seed, and the artifact paths, so a run can be
reproduced exactly. Exit codes: 0 success, 2 usage or format error,
3 numerical divergence.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import TrainConfig
from .errors import ContractError, DivergenceError, NetworkFormatError
from .evaluation import evaluate_embeddings
from .graphs import generate_synthetic_multiplex
from .model import emit_embedding, prepare_network
from .netio import read_network, write_network
from .training import fit

SWEEP_GRID = (0.0001, 0.001, 0.01, 0.1)


def _digest_paths(paths: list[Path]) -> str:
    h = hashlib.sha256()
    for path in sorted(paths):
        h.update(path.name.encode("utf-8"))
        h.update(b"\0")
        h.update(path.read_bytes())
    return h.hexdigest()


def _digest_directory(directory: Path) -> str:
    return _digest_paths([p for p in directory.iterdir() if p.is_file()])


def _write_manifest(path: Path, command: str, config: dict, input_digest: str,
                    seed: int, artifacts: list[str]) -> None:
    manifest = {
        "command": command,
        "config": config,
        "input_digest": input_digest,
        "seed": seed,
        "artifacts": sorted(artifacts),
        "version": __version__,
    }
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")


def write_embeddings(path: Path, embeddings: np.ndarray) -> None:
    lines = ["\t".join([str(i)] + [f"{v:.17g}" for v in row])
             for i, row in enumerate(embeddings)]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_embeddings(path: Path) -> np.ndarray:
    rows = []
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise NetworkFormatError("missing embeddings file", path=str(path)) from None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) < 2:
            raise NetworkFormatError("expected 'node<TAB>v1<TAB>...'", str(path), lineno)
        try:
            index = int(parts[0])
            values = [float(v) for v in parts[1:]]
        except ValueError:
            raise NetworkFormatError("bad number", str(path), lineno) from None
        if index != len(rows):
            raise NetworkFormatError(f"row index {index} out of order", str(path), lineno)
        rows.append(values)
    if not rows:
        raise NetworkFormatError("empty embeddings file", path=str(path))
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise NetworkFormatError("rows differ in dimension", path=str(path))
    return np.array(rows, dtype=np.float64)


def _parse_relation(text: str) -> tuple[float, float]:
    try:
        p_in, p_out = text.split(":")
        return float(p_in), float(p_out)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected 'p_in:p_out', got {text!r}") from None


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="multiplex-infomax",
        description="Unsupervised embeddings for attributed multiplex networks.")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write a synthetic planted-partition benchmark")
    gen.add_argument("--nodes", type=int, required=True)
    gen.add_argument("--classes", type=int, required=True)
    gen.add_argument("--relation", type=_parse_relation, action="append", required=True,
                     metavar="P_IN:P_OUT", help="repeat once per relation")
    gen.add_argument("--attr-dim", type=int, required=True)
    gen.add_argument("--attr-noise", type=float, default=0.2)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True, help="output network directory")

    tr = sub.add_parser("train", help="learn embeddings for a network directory")
    tr.add_argument("--data", required=True, help="network directory")
    tr.add_argument("--dim", type=int, default=64)
    tr.add_argument("--self-weight", type=float, default=3.0)
    tr.add_argument("--alpha", type=float, default=0.001)
    tr.add_argument("--beta", type=float, default=0.001)
    tr.add_argument("--gamma", type=float, default=0.001)
    tr.add_argument("--attention", action="store_true")
    tr.add_argument("--semi-supervised", action="store_true")
    tr.add_argument("--untie-discriminator", action="store_true")
    tr.add_argument("--no-consensus-negative", action="store_true")
    tr.add_argument("--corrupt", choices=["attrs", "adjacency"], default="attrs")
    tr.add_argument("--readout", choices=["average", "maxpool"], default="average")
    tr.add_argument("--emit", choices=["z", "aggregated"], default="z")
    tr.add_argument("--epochs", type=int, default=2000)
    tr.add_argument("--patience", type=int, default=50)
    tr.add_argument("--lr", type=float, default=5e-4)
    tr.add_argument("--seed", type=int, default=0)
    tr.add_argument("--sweep", action="store_true",
                    help="train every alpha/beta (and gamma when semi-supervised) "
                         "combination over {0.0001, 0.001, 0.01, 0.1}")
    tr.add_argument("--out", required=True, help="output directory")

    ev = sub.add_parser("evaluate", help="score an embedding file against labels")
    ev.add_argument("--data", required=True, help="network directory")
    ev.add_argument("--embeddings", required=True, help="embedding TSV file")
    ev.add_argument("--k", type=int, default=5)
    ev.add_argument("--restarts", type=int, default=10)
    ev.add_argument("--seed", type=int, default=0)
    ev.add_argument("--json", metavar="PATH", help="also write the report as JSON")
    return parser


def _cmd_generate(args) -> int:
    out = Path(args.out)
    network = generate_synthetic_multiplex(
        n=args.nodes, classes=args.classes, relations=args.relation,
        attr_dim=args.attr_dim, attr_noise=args.attr_noise, seed=args.seed)
    write_network(network, out)
    config = {
        "nodes": args.nodes, "classes": args.classes,
        "relations": [list(r) for r in args.relation],
        "attr_dim": args.attr_dim, "attr_noise": args.attr_noise,
    }
    artifacts = [p.name for p in out.iterdir() if p.is_file() and p.name != "manifest.json"]
    _write_manifest(out / "manifest.json", "generate", config, "", args.seed, artifacts)
    print(f"wrote {network.n}-node network with {network.num_relations} relation(s) to {out}")
    return 0


def _config_from_args(args, alpha=None, beta=None, gamma=None) -> TrainConfig:
    return TrainConfig(
        embed_dim=args.dim,
        self_weight=args.self_weight,
        alpha=args.alpha if alpha is None else alpha,
        beta=args.beta if beta is None else beta,
        gamma=args.gamma if gamma is None else gamma,
        learning_rate=args.lr,
        max_epochs=args.epochs,
        patience=args.patience,
        seed=args.seed,
        attention=args.attention,
        semi_supervised=args.semi_supervised,
        untied_scoring=args.untie_discriminator,
        consensus_negative_term=not args.no_consensus_negative,
        corruption="attributes" if args.corrupt == "attrs" else "adjacency",
        readout=args.readout,
        emit="consensus" if args.emit == "z" else "aggregated",
    )


def _run_training(network, config: TrainConfig, data_digest: str, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    params, log = fit(network, config)
    embeddings = emit_embedding(params, prepare_network(network, config), config)
    write_embeddings(out / "embeddings.tsv", embeddings)
    with (out / "train_log.jsonl").open("w", encoding="utf-8") as fh:
        for record in log:
            fh.write(json.dumps(record, sort_keys=True) + "\n")
    _write_manifest(out / "manifest.json", "train", config.as_dict(), data_digest,
                    config.seed, ["embeddings.tsv", "train_log.jsonl"])


def _cmd_train(args) -> int:
    data_dir = Path(args.data)
    network = read_network(data_dir)
    digest = _digest_directory(data_dir)
    out = Path(args.out)
    if not args.sweep:
        config = _config_from_args(args)
        _run_training(network, config, digest, out)
        epochs = len((out / "train_log.jsonl").read_text().splitlines())
        print(f"trained {epochs} epoch(s); embeddings at {out / 'embeddings.tsv'}")
        return 0
    gammas = SWEEP_GRID if args.semi_supervised else (args.gamma,)
    cells = [(a, b, g) for a in SWEEP_GRID for b in SWEEP_GRID for g in gammas]
    for alpha, beta, gamma in cells:
        name = f"alpha{alpha:g}_beta{beta:g}"
        if args.semi_supervised:
            name += f"_gamma{gamma:g}"
        config = _config_from_args(args, alpha=alpha, beta=beta, gamma=gamma)
        _run_training(network, config, digest, out / name)
        print(f"sweep cell {name} done")
    print(f"{len(cells)} sweep cell(s) written under {out}")
    return 0


def _cmd_evaluate(args) -> int:
    data_dir = Path(args.data)
    network = read_network(data_dir)
    embeddings_path = Path(args.embeddings)
    embeddings = read_embeddings(embeddings_path)
    if embeddings.shape[0] != network.n:
        raise NetworkFormatError(
            f"embeddings have {embeddings.shape[0]} rows, network has {network.n} nodes",
            path=str(embeddings_path))
    if args.k >= network.n:
        raise ContractError(f"--k {args.k} must be smaller than the node count {network.n}")
    report = evaluate_embeddings(network, embeddings, k=args.k,
                                 restarts=args.restarts, seed=args.seed)
    print(report.as_table())
    if args.json:
        report_path = Path(args.json)
        report_path.write_text(report.as_json() + "\n", encoding="utf-8")
        manifest_path = report_path.with_name(report_path.stem + ".manifest.json")
        artifacts = [report_path.name]
    else:
        manifest_path = embeddings_path.with_name(embeddings_path.stem
                                                  + ".eval.manifest.json")
        artifacts = []
    digest = _digest_paths([p for p in data_dir.iterdir() if p.is_file()]
                           + [embeddings_path])
    config = {"k": args.k, "restarts": args.restarts}
    _write_manifest(manifest_path, "evaluate", config, digest, args.seed, artifacts)
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "generate":
            return _cmd_generate(args)
        if args.command == "train":
            return _cmd_train(args)
        return _cmd_evaluate(args)
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (NetworkFormatError, ContractError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
