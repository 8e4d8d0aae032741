"""Umbrella command-line interface.

Subcommands: synth, split, stats, bm25-build, bm25-query, eval, gradcheck,
serve.  Everything except `serve` with a live backend runs fully offline.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .dataset import (DatasetError, SynthesisSpec, dataset_stats, load_dataset,
                      stratified_split, synthesize_dataset, write_dataset)
from .retrieval import (RetrievalError, build_index, build_title_corpus,
                        load_index, retrieve_top_k, save_index)


def _load_any_dataset(path: str):
    fmt = "csv" if str(path).endswith(".csv") else "jsonl"
    return load_dataset(path, format=fmt)


def _cmd_synth(args) -> int:
    spec = SynthesisSpec(n=args.n, positive_fraction=args.pos_frac,
                         brand_count=args.brands, seed=args.seed)
    data = synthesize_dataset(spec)
    write_dataset(args.out, data)
    stats = dataset_stats(data)
    print(f"wrote {stats.total} pairs to {args.out} "
          f"(positive_fraction={stats.positive_fraction:.4f}, brands={stats.brand_count})")
    return 0


def _parse_ratios(text: str) -> list[float]:
    parts = [float(p) for p in text.split(",")]
    total = sum(parts)
    if total <= 0:
        raise DatasetError("ratios must have a positive sum")
    # CLI convenience: nonnegative weights are normalized to exact fractions.
    return [p / total for p in parts]


def _cmd_split(args) -> int:
    data = _load_any_dataset(args.data)
    bundle = stratified_split(data, _parse_ratios(args.ratios), seed=args.seed)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, split in bundle.as_dict().items():
        write_dataset(out_dir / f"{name}.jsonl", split)
    stats = dataset_stats(data, bundle)
    print(json.dumps({"sizes": bundle.sizes(),
                      "per_split_positive_fraction": stats.per_split_positive_fraction}))
    return 0


def _cmd_stats(args) -> int:
    data = _load_any_dataset(args.data)
    stats = dataset_stats(data)
    print(json.dumps({
        "total": stats.total,
        "positive_fraction": stats.positive_fraction,
        "brand_count": stats.brand_count,
    }))
    return 0


def _cmd_bm25_build(args) -> int:
    records = [json.loads(line) for line in Path(args.corpus).read_text(encoding="utf-8").splitlines() if line.strip()]
    if records and "base_title" in records[0]:
        data = _load_any_dataset(args.corpus)
        corpus = build_title_corpus([lp.pair for lp in data])
    else:
        corpus = [(rec["doc_id"], rec["text"]) for rec in records]
    index = build_index(corpus, k1=args.k1, b=args.b)
    save_index(index, args.out)
    print(f"indexed {len(index)} documents "
          f"(avgdl={index.average_doc_length:.2f}, k1={index.k1}, b={index.b}) -> {args.out}")
    return 0


def _cmd_bm25_query(args) -> int:
    index = load_index(args.index)
    for doc_id, score in retrieve_top_k(index, args.query, k=args.k):
        print(json.dumps({"doc_id": doc_id, "score": score, "text": index.raw_texts[doc_id]}))
    return 0


def _cmd_eval(args) -> int:
    from .config import load_eval_backend
    from .pipelines import run_eval

    data = _load_any_dataset(args.data)
    backend = load_eval_backend(args.backend, data=data)
    run = run_eval(data, args.strategy, backend, k=args.k)
    report = {
        "strategy": args.strategy,
        **run.report.to_dict(),
        "evaluated": len(run.predictions),
        "failures": len(run.failures),
        "failure_rate": run.failure_rate,
        "failed_pairs": [{"pair_id": f.pair_id, "reason": f.reason} for f in run.failures],
    }
    Path(args.out).write_text(json.dumps(report, indent=2), encoding="utf-8")
    print(f"{args.strategy}: acc={run.report.accuracy:.4f} prec={run.report.precision:.4f} "
          f"rec={run.report.recall:.4f} f1={run.report.f1:.4f} "
          f"failures={len(run.failures)} -> {args.out}")
    return 0


def _cmd_gradcheck(args) -> int:
    from .optim import gradcheck_suite

    errors = gradcheck_suite(h=args.h, seed=args.seed)
    worst = max(errors.values())
    for name, err in errors.items():
        print(f"{name}: max_rel_err={err:.3e}")
    print(f"worst: {worst:.3e} ({'ok' if worst < 1e-4 else 'FAIL'} at 1e-4)")
    return 0 if worst < 1e-4 else 1


def _cmd_serve(args) -> int:
    from .config import load_service_config
    from .service import serve

    serve(load_service_config(args.config))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="prodmap",
                                     description="Product-mapping training and evaluation tools.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a deterministic synthetic dataset")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--pos-frac", type=float, default=0.706)
    p.add_argument("--brands", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("split", help="stratified four-way split of a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--ratios", default="0.5,0.333,0.083,0.083",
                   help="comma-separated weights for peft,rl,val,test (normalized to sum 1)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_split)

    p = sub.add_parser("stats", help="dataset label/brand statistics")
    p.add_argument("--data", required=True)
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("bm25-build", help="build and persist a BM25 index")
    p.add_argument("--corpus", required=True,
                   help="dataset JSONL (titles become documents) or {doc_id,text} JSONL")
    p.add_argument("--out", required=True)
    p.add_argument("--k1", type=float, default=1.2)
    p.add_argument("--b", type=float, default=0.75)
    p.set_defaults(func=_cmd_bm25_build)

    p = sub.add_parser("bm25-query", help="query a persisted BM25 index")
    p.add_argument("--index", required=True)
    p.add_argument("--query", required=True)
    p.add_argument("--k", type=int, default=5)
    p.set_defaults(func=_cmd_bm25_query)

    p = sub.add_parser("eval", help="run one inference strategy over a dataset")
    p.add_argument("--strategy", required=True,
                   choices=["zero_shot", "cot", "entity_attr", "reason_label", "rag", "marag"])
    p.add_argument("--data", required=True)
    p.add_argument("--backend", required=True, help="backend config JSON")
    p.add_argument("--out", required=True, help="report JSON path")
    p.add_argument("--k", type=int, default=5, help="evidence depth for retrieval strategies")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("gradcheck", help="finite-difference checks for every loss")
    p.add_argument("--h", type=float, default=1e-5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_gradcheck)

    p = sub.add_parser("serve", help="run the HTTP scoring service")
    p.add_argument("--config", required=True)
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (DatasetError, RetrievalError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
