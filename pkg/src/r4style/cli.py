"""Pipeline subcommands wiring corpus -> features -> solvers -> classifier.

Every option can come from a flat config file (``key = value``, full-line
``#`` comments) passed as ``--config``; explicit flags override config
values. Commands that involve randomness require ``--seed``, and all
randomness is derived from that one seed by stage-name hashing, so reruns
are byte-identical.

Exit codes: 0 success, 1 validation or input error, 2 numerical or runtime
failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path
from types import SimpleNamespace

import numpy as np

from . import classifier, corpus, lexicon, matrixio, solver
from . import slim as slim_mod
from .seeds import derive_seed


class UsageError(ValueError):
    """Bad flags, bad config, or missing inputs."""


# ---------------------------------------------------------------------------
# option plumbing: argparse collects raw strings, config fills gaps,
# converters run once on whichever source won
# ---------------------------------------------------------------------------


def _bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _int_list(raw: str) -> list[int]:
    return [int(part) for part in raw.split(",") if part.strip()]


def _str_list(raw: str) -> list[str]:
    return [part.strip() for part in raw.split(",") if part.strip()]


class _Opt:
    def __init__(self, name, conv=str, default=None, required=False, help="", switch=False):
        self.name = name
        self.conv = conv
        self.default = default
        self.required = required
        self.help = help
        self.switch = switch  # presence-only flag, config value must be boolean text

    @property
    def flag(self) -> str:
        return "--" + self.name.replace("_", "-")


def load_config(path: str | Path) -> dict[str, str]:
    """Flat ``key = value`` file; ``#`` lines are comments."""
    p = Path(path)
    cfg: dict[str, str] = {}
    for lineno, raw in enumerate(p.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"{p}:{lineno}: expected key = value")
        key, _, val = line.partition("=")
        key = key.strip().replace("-", "_")
        if not key:
            raise UsageError(f"{p}:{lineno}: empty key")
        cfg[key] = val.strip()
    return cfg


def _resolve(args: argparse.Namespace, opts: list[_Opt]) -> SimpleNamespace:
    cfg = load_config(args.config) if args.config else {}
    known = {o.name for o in opts}
    for key in cfg:
        if key not in known:
            raise UsageError(f"unknown config key {key!r}")
    out = {}
    for o in opts:
        raw = getattr(args, o.name)
        if raw is None and o.name in cfg:
            raw = cfg[o.name]
        if raw is None:
            if o.required:
                raise UsageError(f"missing required option {o.flag}")
            out[o.name] = o.default
            continue
        if not isinstance(raw, str):
            out[o.name] = raw
            continue
        try:
            out[o.name] = o.conv(raw)
        except ValueError as exc:
            raise UsageError(f"invalid value for {o.flag}: {raw!r} ({exc})") from exc
    return SimpleNamespace(**out)


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default exits with code 2; we map to 1
        raise UsageError(message)


_COMMON = [_Opt("config", str, help="flat key=value config file")]

_OPTIONS: dict[str, list[_Opt]] = {
    "extract": _COMMON
    + [
        _Opt("input", required=True, help="text file, directory of files, or .jsonl with a text field"),
        _Opt("vocab", required=True, help="sensorial vocabulary, one word per line"),
        _Opt("lexicon", required=True, help="category lexicon file"),
        _Opt("out", required=True, help="output records .jsonl path"),
        _Opt("sample", int, help="subsample this many records"),
        _Opt("seed", int, help="master seed (required with --sample)"),
    ],
    "featurize": _COMMON
    + [
        _Opt("records", required=True, help="records .jsonl from extract"),
        _Opt("vocab", required=True),
        _Opt("out_prefix", required=True, help="writes PREFIX.X.slmx, PREFIX.targets.txt, PREFIX.meta.json"),
    ],
    "fit-r4": _COMMON
    + [
        _Opt("features", required=True, help="style matrix .slmx"),
        _Opt("targets", required=True, help="target indices, one per line"),
        _Opt("rank", int, required=True),
        _Opt("lam", float, 0.0, help="ridge weight"),
        _Opt("max_iters", int, 200),
        _Opt("tol", float, 1e-8),
        _Opt("n", int, help="vocabulary size (or pass --vocab)"),
        _Opt("vocab", help="vocabulary file, used for n and hash"),
        _Opt("lexicon", help="category lexicon, stores category names with the model"),
        _Opt("out_prefix", required=True),
    ],
    "sweep": _COMMON
    + [
        _Opt("features", required=True),
        _Opt("targets", required=True),
        _Opt("ranks", _int_list, required=True, help="comma-separated rank list"),
        _Opt("lam", float, 0.0),
        _Opt("split", float, 0.8, help="train fraction"),
        _Opt("seed", int, required=True),
        _Opt("n", int),
        _Opt("vocab", str),
        _Opt("out_prefix", required=True, help="writes PREFIX.sweep.csv and PREFIX.sweep.long.csv"),
    ],
    "svd": _COMMON
    + [
        _Opt("embeddings", required=True, help="embedding matrix .slmx"),
        _Opt("rank", int, required=True),
        _Opt("center", _bool, False, switch=True, help="subtract the column mean first"),
        _Opt("out_prefix", required=True),
    ],
    "train-eval": _COMMON
    + [
        _Opt("features", required=True, help="style matrix .slmx"),
        _Opt("targets", required=True),
        _Opt("n", int),
        _Opt("vocab", str),
        _Opt("embeddings", help="embedding matrix .slmx (needed by embedding modes)"),
        _Opt("svd_rank", int, help="compress embeddings to this rank first"),
        _Opt("style_model", help="prefix of a saved low-rank style model for the latent mode"),
        _Opt("latent_rank", int, help="fit a ridge low-rank style model of this rank instead"),
        _Opt("lam", float, 0.0, help="ridge weight for --latent-rank"),
        _Opt("modes", _str_list, list(classifier.MODES), help="comma-separated subset of evaluation modes"),
        _Opt("folds", int, 5),
        _Opt("epochs", int, 10),
        _Opt("batch_size", int, 128),
        _Opt("lr", float, 0.05),
        _Opt("hidden", _int_list, [512], help="hidden layer sizes, comma-separated"),
        _Opt("top_classes", int, help="restrict evaluation to the c most frequent classes"),
        _Opt("standardize", _bool, True),
        _Opt("seed", int, required=True),
        _Opt("out_dir", required=True),
    ],
    "export-heatmap": _COMMON
    + [
        _Opt("model", required=True, help="saved model prefix"),
        _Opt("lexicon", required=True),
        _Opt("out", required=True, help="CSV path; a row-normalized .abs.csv is written next to it"),
    ],
}
_OPTIONS["fit-srrr"] = _OPTIONS["fit-r4"]


def _build_parser() -> _Parser:
    parser = _Parser(prog="r4style", description=__doc__)
    sub = parser.add_subparsers(dest="command", metavar="command")
    for name, opts in _OPTIONS.items():
        p = sub.add_parser(name, help=None)
        for o in opts:
            if o.switch:
                p.add_argument(o.flag, dest=o.name, action="store_const", const="true",
                               default=None, help=o.help)
            else:
                p.add_argument(o.flag, dest=o.name, default=None, help=o.help)
    return parser


# ---------------------------------------------------------------------------
# shared input helpers
# ---------------------------------------------------------------------------


def _read_targets(path: str | Path) -> np.ndarray:
    p = Path(path)
    values: list[int] = []
    for lineno, line in enumerate(p.read_text(encoding="utf-8").splitlines(), 1):
        text = line.strip()
        if not text:
            continue
        try:
            values.append(int(text))
        except ValueError:
            raise UsageError(f"{p}:{lineno}: expected an integer target index, got {text!r}")
    if not values:
        raise UsageError(f"{p}: no target indices")
    return np.array(values, dtype=np.int64)


def _resolve_n(o, y: np.ndarray) -> int:
    if o.n is not None:
        n = int(o.n)
    elif o.vocab is not None:
        n = lexicon.load_vocabulary(o.vocab).size
    else:
        raise UsageError("pass --n or --vocab to fix the target dimension")
    if y.max() >= n or y.min() < 0:
        raise UsageError(f"target index {int(y.max())} out of range for n={n}")
    return n


def _file_sha256(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_extract(o) -> int:
    vocab = lexicon.load_vocabulary(o.vocab)
    lex = lexicon.load_category_lexicon(o.lexicon)
    sentences: list[str] = []
    for doc in corpus.iter_documents(o.input):
        sentences.extend(corpus.segment(doc))
    counters: dict[str, int] = {}
    records = corpus.extract_records(sentences, vocab, lex, counters)
    if o.sample is not None:
        if o.seed is None:
            raise UsageError("--seed is required with --sample")
        records = corpus.sample_records(records, o.sample, derive_seed(o.seed, "sample"))
    corpus.write_records(records, o.out, vocab, lex, counters)
    print(
        f"sentences={counters['sentences']} records={len(records)} "
        f"skipped_single_token={counters['skipped_single_token']}"
    )
    return 0


def cmd_featurize(o) -> int:
    vocab = lexicon.load_vocabulary(o.vocab)
    records = corpus.read_records(o.records, vocab)
    if not records:
        raise UsageError(f"{o.records}: no records to featurize")
    ds = matrixio.assemble(records)
    matrixio.write_matrix(ds.X, o.out_prefix + ".X.slmx")
    Path(o.out_prefix + ".targets.txt").write_text(
        "".join(f"{int(v)}\n" for v in ds.y), encoding="utf-8"
    )
    meta = {
        "k": ds.k,
        "m": ds.m,
        "n": ds.n,
        "vocab_sha256": vocab.content_hash(),
        "records_sha256": _file_sha256(o.records),
    }
    Path(o.out_prefix + ".meta.json").write_text(
        json.dumps(meta, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    print(f"k={ds.k} m={ds.m} n={ds.n}")
    return 0


def _load_xy(o):
    X = matrixio.read_matrix(o.features).astype(np.float64)
    y = _read_targets(o.targets)
    if y.shape[0] != X.shape[0]:
        raise UsageError(
            f"{o.targets} has {y.shape[0]} entries but {o.features} has {X.shape[0]} rows"
        )
    n = _resolve_n(o, y)
    return X, y, n


def cmd_fit(o, kind: str) -> int:
    X, y, n = _load_xy(o)
    Y = matrixio.IndexedTargets(indices=y, n=n)
    if kind == "r4":
        model = solver.fit_r4(X, Y, o.rank, lam=o.lam, max_iters=o.max_iters, tol=o.tol)
    else:
        model = solver.fit_srrr(X, Y, o.rank, lam=o.lam, max_iters=o.max_iters, tol=o.tol)
    names = None
    if o.lexicon is not None:
        lex = lexicon.load_category_lexicon(o.lexicon)
        if lex.m != X.shape[1]:
            raise UsageError(f"lexicon has {lex.m} categories but X has {X.shape[1]} columns")
        names = lex.names
    vocab_hash = (
        lexicon.load_vocabulary(o.vocab).content_hash() if o.vocab is not None else None
    )
    solver.save_model(model, o.out_prefix, category_names=names, vocab_hash=vocab_hash)
    line = (
        f"kind={kind} rank={model.rank} lam={model.lam!r} "
        f"iterations={len(model.objective_trace)} converged={model.converged} "
        f"objective={model.objective_trace[-1]!r}"
    )
    if kind == "srrr":
        line += f" zero_rows={len(model.zero_rows)}"
    print(line)
    return 0


def cmd_sweep(o) -> int:
    X, y, n = _load_xy(o)
    Y = matrixio.IndexedTargets(indices=y, n=n)
    result = solver.rank_sweep(
        X, Y, o.ranks, lam=o.lam, split=o.split, seed=derive_seed(o.seed, "sweep-split")
    )
    result.write_csv(o.out_prefix + ".sweep.csv")
    result.write_long_csv(o.out_prefix + ".sweep.long.csv")
    print(f"ranks={len(result.entries)} best_rank={result.best_rank()}")
    return 0


def cmd_svd(o) -> int:
    E = matrixio.read_matrix(o.embeddings).astype(np.float64)
    svd = slim_mod.truncated_svd(E, o.rank, center=o.center)
    slim_mod.save_svd(svd, o.out_prefix, source_hash=_file_sha256(o.embeddings))
    print(f"rank={svd.rank} discarded_energy={svd.discarded_energy!r}")
    return 0


def cmd_train_eval(o) -> int:
    X, y, n = _load_xy(o)
    for mode in o.modes:
        if mode not in classifier.MODES:
            raise UsageError(f"unknown mode {mode!r}; expected subset of {classifier.MODES}")

    E = None
    if o.embeddings is not None:
        E = matrixio.read_matrix(o.embeddings).astype(np.float64)
        if E.shape[0] != X.shape[0]:
            raise UsageError(
                f"{o.embeddings} has {E.shape[0]} rows but {o.features} has {X.shape[0]}"
            )
    needs_embeddings = [m for m in o.modes if m != "style_only"]
    if needs_embeddings and E is None:
        raise UsageError(
            f"modes {needs_embeddings} need --embeddings, which was not provided"
        )

    svd = None
    if o.svd_rank is not None:
        if E is None:
            raise UsageError("--svd-rank needs --embeddings")
        svd = slim_mod.truncated_svd(E, o.svd_rank)

    style_model = None
    if o.style_model is not None:
        style_model = solver.load_model(o.style_model)
        if style_model.m != X.shape[1]:
            raise UsageError(
                f"style model expects {style_model.m} features, X has {X.shape[1]} columns"
            )
    elif o.latent_rank is not None:
        style_model = solver.fit_r4(X, matrixio.IndexedTargets(indices=y, n=n), o.latent_rank, lam=o.lam)
    if "embedding+latent_style" in o.modes and style_model is None:
        raise UsageError(
            "mode embedding+latent_style needs --style-model or --latent-rank"
        )

    restriction = None
    if o.top_classes is not None:
        classes = classifier.most_frequent_classes(y, o.top_classes)
        keep = np.isin(y, classes)
        remap = {int(c): i for i, c in enumerate(classes)}
        X = X[keep]
        y = np.array([remap[int(v)] for v in y[keep]], dtype=np.int64)
        if E is not None:
            E = E[keep]
        n_classes = len(classes)
        restriction = int(o.top_classes)
    else:
        n_classes = n

    ds = matrixio.Dataset(X=X, y=y, n=n_classes, E=E)
    out_dir = Path(o.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    reports = []
    for mode in o.modes:
        feats = classifier.build_features(ds, svd=svd, r4=style_model,
                                          spec=classifier.FeatureSpec(mode=mode))
        report = classifier.evaluate_cv(
            feats,
            y,
            n_classes=n_classes,
            folds=o.folds,
            seed=derive_seed(o.seed, f"train-eval-{mode}"),
            standardize=o.standardize,
            hidden=o.hidden,
            epochs=o.epochs,
            batch_size=o.batch_size,
            lr=o.lr,
            mode=mode,
            class_restriction=restriction,
        )
        reports.append(report)
        (out_dir / (mode.replace("+", "_") + ".json")).write_text(
            report.to_json(), encoding="utf-8"
        )
        print(f"{mode} mean_accuracy={report.mean_accuracy!r}")
    header = "mode,mean_accuracy," + ",".join(f"fold_{i + 1}" for i in range(o.folds))
    lines = [header] + [r.csv_row() for r in reports]
    (out_dir / "summary.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return 0


def cmd_export_heatmap(o) -> int:
    model = solver.load_model(o.model)
    lex = lexicon.load_category_lexicon(o.lexicon)
    raw_path, abs_path = solver.export_heatmap(model, lex, o.out)
    print(f"wrote {raw_path} and {abs_path}")
    return 0


_DISPATCH = {
    "extract": cmd_extract,
    "featurize": cmd_featurize,
    "fit-r4": lambda o: cmd_fit(o, "r4"),
    "fit-srrr": lambda o: cmd_fit(o, "srrr"),
    "sweep": cmd_sweep,
    "svd": cmd_svd,
    "train-eval": cmd_train_eval,
    "export-heatmap": cmd_export_heatmap,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_usage(sys.stderr)
            return 1
        opts = _resolve(args, _OPTIONS[args.command])
        return _DISPATCH[args.command](opts)
    except SystemExit as exc:  # argparse --help
        return 0 if exc.code in (0, None) else 1
    except (ValueError, FileNotFoundError, IsADirectoryError, NotADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ArithmeticError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
