"""Command-line front end: ``orsa {generate,train,sweep,lof,report}``.

Every failure exits with status 2 and a single line on stderr of the form
``orsa: error: <Kind>: <message>``.
"""

import argparse
import logging
import sys

from . import harness


class _Parser(argparse.ArgumentParser):
    """Usage errors on one line, like every other failure."""

    def error(self, message):
        self.exit(2, f"orsa: error: UsageError: {self.prog}: {message}\n")


def _build_parser():
    p = _Parser(prog="orsa", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log training progress")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="write a synthetic multi-device dataset")
    g.add_argument("--config", required=True, help="run config (JSON) with a 'synth' section")
    g.add_argument("--out", required=True, help="dataset directory")
    g.add_argument("--seed", type=int, help="override synth.seed")

    t = sub.add_parser("train", help="train the aggregation network on a dataset")
    t.add_argument("dataset", nargs="?", help="dataset directory")
    t.add_argument("--config", help="run config (JSON); defaults to the artificial setup")
    t.add_argument("--out", required=True, help="run directory")
    t.add_argument("--seed", type=int, help="override orsa.seed")
    t.add_argument("--k-s", type=int, help="selection size")
    t.add_argument("--k-lof", type=int, help="LOF neighbour count")
    t.add_argument("--mode", choices=["min", "max"], help="soft-min or soft-max")
    t.add_argument("--steps", type=int, help="override orsa.steps")
    t.add_argument("--from-run", help="repeat the run recorded in this run directory")

    s = sub.add_parser("sweep", help="train over a grid of (k_s, k_lof)")
    s.add_argument("dataset", help="dataset directory")
    s.add_argument("--config", help="run config (JSON)")
    s.add_argument("--out", required=True, help="sweep directory")
    s.add_argument("--grid", help="comma-separated k_s:k_lof pairs, e.g. 1:1,6:6,30:29")
    s.add_argument("--seed", type=int, help="override orsa.seed")
    s.add_argument("--mode", choices=["min", "max"])
    s.add_argument("--steps", type=int, help="override orsa.steps")
    s.add_argument("--workers", type=int, default=1, help="parallel worker processes")

    lo = sub.add_parser("lof", help="LOF scores for a column of numbers")
    lo.add_argument("input", help="file with one number per line")
    lo.add_argument("--k", "--k-lof", dest="k", type=int, required=True, help="neighbour count")
    lo.add_argument("--out", required=True, help="output file, one score per line")

    r = sub.add_parser("report", help="merge a run's CSVs into report.json")
    r.add_argument("run_dir")
    return p


def _dispatch(args):
    if args.command == "generate":
        path = harness.run_generate(harness.load_config(args.config), args.out, args.seed)
        print(path)
    elif args.command == "train":
        if args.from_run:
            harness.rerun(args.from_run, args.out)
        else:
            if not args.dataset:
                raise ValueError("train needs a dataset directory or --from-run")
            doc = harness.load_config(args.config) if args.config else {}
            harness.run_train(args.dataset, doc, args.out, k_s=args.k_s, k_lof=args.k_lof,
                              mode=args.mode, seed=args.seed, steps=args.steps)
        print(args.out)
    elif args.command == "sweep":
        doc = harness.load_config(args.config) if args.config else {}
        orsa = dict(doc.get("orsa") or {})
        for key in ("seed", "mode", "steps"):
            if getattr(args, key) is not None:
                orsa[key] = getattr(args, key)
        doc = dict(doc, orsa=orsa)
        grid = harness.parse_grid(args.grid) if args.grid else None
        for row in harness.run_sweep(args.dataset, doc, args.out, grid, args.workers):
            print("k_s={k_s} k_lof={k_lof} rmse_extreme={rmse_extreme:.4f} "
                  "rmse_mean={rmse_mean:.4f} frac_between={frac_between:.2f}".format(**row))
    elif args.command == "lof":
        harness.run_lof(args.input, args.k, args.out)
        print(args.out)
    elif args.command == "report":
        print(harness.run_report(args.run_dir))


def main(argv=None):
    try:
        args = _build_parser().parse_args(argv)
    except SystemExit as exc:
        return exc.code
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    try:
        _dispatch(args)
    except (ValueError, OSError, KeyError, TypeError) as exc:
        msg = " ".join(str(exc).split())
        print(f"orsa: error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
