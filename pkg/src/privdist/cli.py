"""Command-line front end.

Subcommands cover the interactive and offline l1 release, the embedding
pipeline for l2 and matrix metrics, exact oracle runs, and transcript
comparison. All outputs are deterministic given (config, seed): reports are
canonical JSON (sorted keys, no timestamps) and answer files are JSON
lines. Failures print a machine-readable error object to stderr.

Exit codes: 0 success, 2 validation or parse failure, 3 infeasible
calibration, 4 accuracy bound exceeded (compare).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import dataclass

import numpy as np

from . import __version__
from .embed import build_bourgain, build_projection, release_via_embedding
from .engine import CalibrationError, NoiseKind, PrivacyParams
from .metric import (Database, MetricSpec, ParseError, QuerySet, load_labels,
                     load_matrix, load_points, oracle_answers, save_points)
from .release import InteractiveMechanism, OfflineSummary, release_offline

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_INFEASIBLE = 3
EXIT_ACCURACY = 4


@dataclass
class ExperimentConfig:
    epsilon: float = 1.0
    delta: float = 0.0
    beta: float = 0.1
    k_max: int = 100
    noise: str = "laplace"
    seed: int = 0
    alpha: float | None = None

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
        known = {"epsilon", "delta", "beta", "k_max", "noise", "seed", "alpha"}
        extra = set(obj) - known
        if extra:
            raise ValueError(f"unknown config keys: {sorted(extra)}")
        cfg = cls(**{k: obj[k] for k in obj})
        if cfg.noise not in ("laplace", "gaussian", "off"):
            raise ValueError(f"noise must be laplace, gaussian or off, "
                             f"got {cfg.noise!r}")
        if cfg.alpha is not None and cfg.noise != "off":
            raise ValueError("config alpha is only valid with noise off")
        return cfg

    def params(self) -> PrivacyParams:
        return PrivacyParams(self.epsilon, self.delta, self.beta, self.k_max)

    def noise_kind(self) -> NoiseKind:
        return NoiseKind(self.noise)

    def digest(self) -> str:
        blob = json.dumps(self.__dict__, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _error(exc: Exception) -> dict:
    obj = {"error": {"type": type(exc).__name__, "message": str(exc)}}
    if isinstance(exc, CalibrationError):
        obj["error"]["min_alpha"] = exc.min_alpha
    return obj


def _emit(obj: dict, path=None) -> None:
    text = json.dumps(obj, sort_keys=True)
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _write_jsonl(path, records) -> None:
    lines = [json.dumps(r, sort_keys=True) for r in records]
    text = "\n".join(lines) + ("\n" if lines else "")
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _read_jsonl(path) -> list[dict]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                out.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ParseError(f"bad JSON record: {exc}", lineno) from None
    return out


def _load_coord_db(path, space: str) -> Database:
    points, dim = load_points(path)
    spec = (MetricSpec.l1(dim) if space == "l1" else MetricSpec.l2(dim)).normalize()
    return Database(spec, points)


def _load_coord_queries(path, db: Database) -> QuerySet:
    points, dim = load_points(path)
    if dim != db.spec.dimension:
        raise ValueError(f"query dimension {dim} does not match database "
                         f"dimension {db.spec.dimension}")
    return QuerySet(db.spec, points)


def _load_matrix_db(metric_path, db_path, queries_path):
    spec = load_matrix(metric_path)
    db = Database.from_labels(spec, load_labels(db_path))
    queries = QuerySet.from_labels(spec, load_labels(queries_path))
    return db, queries


def _query_repr(db_spec: MetricSpec, q) -> list | str:
    if db_spec.labels:
        return db_spec.labels[int(q)]
    return [float(v) for v in np.atleast_1d(q)]


def _record(query_repr, ans, oracle=None) -> dict:
    rec = {"query": query_repr, "answer": float(ans.value),
           "mistake": bool(ans.mistake), "eps_spent": float(ans.eps_spent)}
    if ans.refused:
        rec["refused"] = True
    if ans.beyond_query_limit:
        rec["beyond_query_limit"] = True
    if oracle is not None:
        rec["oracle"] = float(oracle)
        rec["abs_error"] = abs(float(ans.value) - float(oracle))
    return rec


# ---------------------------------------------------------------------------
# Subcommands

def cmd_release_l1(args) -> int:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    if args.noise is not None:
        cfg.noise = args.noise
    db = _load_coord_db(args.db, "l1")
    queries = _load_coord_queries(args.queries, db)
    mech = InteractiveMechanism.create(db, cfg.params(), noise=cfg.noise_kind(),
                                       seed=cfg.seed, alpha=cfg.alpha)
    oracle = oracle_answers(db, queries) if args.with_oracle else None
    records = []
    for idx, q in enumerate(queries.points):
        ans = mech.answer(q)
        records.append(_record(_query_repr(db.spec, q), ans,
                               oracle[idx] if oracle is not None else None))
    _write_jsonl(args.out, records)
    stats = mech.stats()
    report = {
        "mechanism": "release-l1", "version": __version__,
        "config_digest": cfg.digest(), "seed": cfg.seed, "noise": cfg.noise,
        "n": db.n, "dimension": db.spec.dimension, "k": queries.k,
        "alpha": mech.plan.alpha, "output_scale": db.spec.output_scale,
        "queries": stats.queries, "mistakes": stats.mistakes,
        "epsilon_spent": stats.epsilon_spent, "delta_spent": stats.delta_spent,
        "refusing": mech.refusing,
    }
    if oracle is not None:
        errs = [r["abs_error"] for r in records]
        report["max_abs_error"] = max(errs)
        report["mean_abs_error"] = sum(errs) / len(errs)
    _emit(report)
    return EXIT_OK


def cmd_release_offline(args) -> int:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    if args.noise is not None:
        cfg.noise = args.noise
    db = _load_coord_db(args.db, "l1")
    summary, stats = release_offline(db, cfg.params(), noise=cfg.noise_kind(),
                                     seed=cfg.seed, alpha=cfg.alpha)
    payload = summary.to_dict()
    payload["provenance"]["config_digest"] = cfg.digest()
    payload["provenance"]["version"] = __version__
    payload["provenance"]["output_scale"] = db.spec.output_scale
    _emit(payload, args.out)
    _emit({"mechanism": "release-offline", "alpha": summary.alpha,
           "grid_queries": stats.queries, "mistakes": stats.mistakes,
           "epsilon_spent": stats.epsilon_spent,
           "delta_spent": stats.delta_spent, "seed": cfg.seed,
           "config_digest": cfg.digest(), "version": __version__})
    return EXIT_OK


def cmd_answer(args) -> int:
    with open(args.synopsis, "r", encoding="utf-8") as fh:
        summary = OfflineSummary.from_dict(json.load(fh))
    points, dim = load_points(args.queries)
    if dim != summary.dimension:
        raise ValueError(f"query dimension {dim} does not match synopsis "
                         f"dimension {summary.dimension}")
    records = [{"query": [float(v) for v in q],
                "answer": summary.answer(q), "mistake": False,
                "eps_spent": 0.0} for q in points]
    _write_jsonl(args.out, records)
    return EXIT_OK


def cmd_embed(args) -> int:
    seed = args.seed if args.seed is not None else 0
    rng = np.random.default_rng(seed)
    if args.kind == "projection":
        db = _load_coord_db(args.db, "l2")
        queries = _load_coord_queries(args.queries, db)
        emb = build_projection(db.spec.dimension, args.distortion_alpha, rng)
        meta = {"kind": "projection", "alpha": emb.alpha,
                "image_dim": emb.image_dim, "source_dim": emb.source_dim}
    else:
        if not args.metric:
            raise ValueError("bourgain embedding requires --metric")
        db, queries = _load_matrix_db(args.metric, args.db, args.queries)
        emb = build_bourgain(queries.k, db.n, rng)
        meta = {"kind": "bourgain", "levels": emb.levels, "width": emb.width,
                "image_dim": emb.image_dim, "query_count": emb.query_count}
    proxy = emb.apply(db.points, db.spec, queries.points)
    out = args.out or "proxy.csv"
    save_points(out, proxy)
    meta.update({"seed": seed, "n": db.n, "version": __version__,
                 "output_scale": db.spec.output_scale})
    _emit(meta, out + ".meta.json")
    _emit(meta)
    return EXIT_OK


def cmd_release_metric(args) -> int:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    if args.noise is not None:
        cfg.noise = args.noise
    rng = np.random.default_rng(cfg.seed)
    if args.metric:
        db, queries = _load_matrix_db(args.metric, args.db, args.queries)
        embedding = args.embedding or "bourgain"
    else:
        db = _load_coord_db(args.db, "l2")
        queries = _load_coord_queries(args.queries, db)
        embedding = args.embedding or "projection"
    if embedding == "projection":
        emb = build_projection(db.spec.dimension, args.distortion_alpha, rng)
    else:
        emb = build_bourgain(queries.k, db.n, rng)
    result = release_via_embedding(db, queries, emb, cfg.params(),
                                   noise=cfg.noise_kind(), seed=cfg.seed,
                                   alpha=cfg.alpha)
    oracle = oracle_answers(db, queries) if args.with_oracle else None
    records = []
    sandwich_violations = 0
    for idx, ans in enumerate(result.answers):
        rec = _record(_query_repr(db.spec, queries.points[idx]), ans,
                      oracle[idx] if oracle is not None else None)
        if oracle is not None:
            lo = oracle[idx] / result.lower_bound_factor - result.alpha
            hi = oracle[idx] + result.alpha
            if not (lo - 1e-9 <= ans.value <= hi + 1e-9):
                sandwich_violations += 1
        records.append(rec)
    _write_jsonl(args.out, records)
    q = result.quality
    report = {
        "mechanism": "release-metric", "embedding": embedding,
        "version": __version__, "config_digest": cfg.digest(),
        "seed": cfg.seed, "noise": cfg.noise, "n": db.n, "k": queries.k,
        "alpha": result.alpha, "image_dim": result.image_dim,
        "expansion": q.expansion, "contraction": q.contraction,
        "distortion": q.distortion, "bound_violations": q.violations,
        "lower_bound_factor": result.lower_bound_factor,
        "output_scale": db.spec.output_scale,
        "queries": result.stats.queries, "mistakes": result.stats.mistakes,
        "epsilon_spent": result.stats.epsilon_spent,
        "delta_spent": result.stats.delta_spent,
    }
    if oracle is not None:
        report["sandwich_violations"] = sandwich_violations
        report["max_abs_error"] = max(r["abs_error"] for r in records)
    _emit(report)
    return EXIT_OK


def cmd_oracle(args) -> int:
    if args.metric:
        db, queries = _load_matrix_db(args.metric, args.db, args.queries)
    else:
        db = _load_coord_db(args.db, args.space)
        queries = _load_coord_queries(args.queries, db)
    answers = oracle_answers(db, queries)
    records = [{"query": _query_repr(db.spec, q), "answer": float(a),
                "mistake": False, "eps_spent": 0.0}
               for q, a in zip(queries.points, answers)]
    _write_jsonl(args.out, records)
    return EXIT_OK


def cmd_compare(args) -> int:
    got = _read_jsonl(args.answers)
    ref = _read_jsonl(args.reference)
    if len(got) != len(ref):
        raise ValueError(f"answer count {len(got)} does not match "
                         f"reference count {len(ref)}")
    if not got:
        raise ValueError("nothing to compare")
    errs = [abs(a["answer"] - b["answer"]) for a, b in zip(got, ref)]
    report = {"count": len(errs), "max_abs_error": max(errs),
              "mean_abs_error": sum(errs) / len(errs)}
    if args.bound is not None:
        report["bound"] = args.bound
        report["within_bound"] = report["max_abs_error"] <= args.bound
    _emit(report, args.out)
    if args.bound is not None and report["max_abs_error"] > args.bound:
        return EXIT_ACCURACY
    return EXIT_OK


# ---------------------------------------------------------------------------

def _add_common(sp, config=True, oracle_flag=False):
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--out", default=None)
    if config:
        sp.add_argument("--config", default=None)
        sp.add_argument("--noise", choices=["laplace", "gaussian", "off"],
                        default=None)
    if oracle_flag:
        sp.add_argument("--with-oracle", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="privdist",
        description="Differentially private average-distance release")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("release-l1", help="interactive l1 release")
    sp.add_argument("--db", required=True)
    sp.add_argument("--queries", required=True)
    _add_common(sp, oracle_flag=True)
    sp.set_defaults(func=cmd_release_l1)

    sp = sub.add_parser("release-offline", help="offline l1 synopsis")
    sp.add_argument("--db", required=True)
    _add_common(sp)
    sp.set_defaults(func=cmd_release_offline)

    sp = sub.add_parser("answer", help="answer queries from a synopsis")
    sp.add_argument("--synopsis", required=True)
    sp.add_argument("--queries", required=True)
    _add_common(sp, config=False)
    sp.set_defaults(func=cmd_answer)

    sp = sub.add_parser("embed", help="embed a database into l1")
    sp.add_argument("--kind", choices=["projection", "bourgain"], required=True)
    sp.add_argument("--db", required=True)
    sp.add_argument("--queries", required=True)
    sp.add_argument("--metric", default=None)
    sp.add_argument("--distortion-alpha", type=float, default=0.25)
    _add_common(sp, config=False)
    sp.set_defaults(func=cmd_embed)

    sp = sub.add_parser("release-metric",
                        help="embed then release over a general metric")
    sp.add_argument("--db", required=True)
    sp.add_argument("--queries", required=True)
    sp.add_argument("--metric", default=None)
    sp.add_argument("--embedding", choices=["projection", "bourgain"],
                    default=None)
    sp.add_argument("--distortion-alpha", type=float, default=0.25)
    _add_common(sp, oracle_flag=True)
    sp.set_defaults(func=cmd_release_metric)

    sp = sub.add_parser("oracle", help="exact answers, no privacy")
    sp.add_argument("--db", required=True)
    sp.add_argument("--queries", required=True)
    sp.add_argument("--metric", default=None)
    sp.add_argument("--space", choices=["l1", "l2"], default="l1")
    _add_common(sp, config=False)
    sp.set_defaults(func=cmd_oracle)

    sp = sub.add_parser("compare", help="compare two answer files")
    sp.add_argument("--answers", required=True)
    sp.add_argument("--reference", required=True)
    sp.add_argument("--bound", type=float, default=None)
    _add_common(sp, config=False)
    sp.set_defaults(func=cmd_compare)

    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CalibrationError as exc:
        print(json.dumps(_error(exc), sort_keys=True), file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ParseError, ValueError, OSError, KeyError) as exc:
        print(json.dumps(_error(exc), sort_keys=True), file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
