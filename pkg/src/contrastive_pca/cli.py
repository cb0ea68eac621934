"""Command-line front end: a thin client over the service operations.

By default each subcommand invokes the operation in-process; with
``--server URL`` the same request is posted to a running service
instance instead. Exit codes: 0 success, 1 usage error, 2 I/O error,
3 domain error (the computation rejected the data).

The contrast weight is normalized to [0, 1] for both methods. Tools
using the unnormalized weighted-difference variant with weight g >= 0
relate to ``--contrast c`` (method cpca) by g = c / (1 - c).
"""

import argparse
import json
import sys

from . import __version__, workflows

EXIT_BY_KIND = {"usage": 1, "io": 2, "domain": 3}

_COMMANDS = {
    "gen": workflows.run_gen,
    "fit": workflows.run_fit,
    "stream": workflows.run_stream_cmd,
    "sweep": workflows.run_sweep,
    "eval": workflows.run_eval,
    "plot": workflows.run_plot,
}


class ClientError(Exception):
    def __init__(self, kind, message):
        self.kind = kind
        super().__init__(message)


class LocalClient:
    """Run operations in-process."""

    def post(self, op, payload):
        try:
            return _COMMANDS[op](**payload)
        except Exception as e:
            raise ClientError(workflows.error_kind(e), str(e)) from e


class HttpClient:
    """Post operations to a running service."""

    def __init__(self, base_url):
        self.base_url = base_url.rstrip("/")

    def post(self, op, payload):
        import httpx

        resp = httpx.post(f"{self.base_url}/{op}", json=payload, timeout=600.0)
        if resp.status_code >= 400:
            kind = "domain"
            message = resp.text
            try:
                detail = resp.json().get("detail")
                if isinstance(detail, dict) and "kind" in detail:
                    kind = detail["kind"]
                    message = detail.get("message", message)
                elif resp.status_code == 422:
                    kind = "usage"
                    message = str(detail)
            except ValueError:
                pass
            raise ClientError(kind, message)
        return resp.json()


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _csv_list(text):
    return [t for t in text.split(",") if t]


def _add_data_options(p):
    p.add_argument("--normalize", choices=["none", "rms"], default="none",
                   help="preprocessing applied after loading (rms: divide by global RMS)")
    p.add_argument("--label-col", help="label column name for CSV inputs")
    p.add_argument("--tag-col", help="auxiliary tag column name for CSV inputs")
    p.add_argument("--drop-cols", type=_csv_list, default=[],
                   help="comma-separated CSV columns to ignore")


def _data_payload(args):
    return {
        "normalize": args.normalize,
        "label_column": args.label_col,
        "tag_column": args.tag_col,
        "drop_columns": args.drop_cols,
    }


def build_parser():
    parser = _Parser(prog="cpca", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"cpca {__version__}")
    parser.add_argument("--server", help="base URL of a running service; default is in-process")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="generate a dataset file")
    p.add_argument("kind", choices=list(workflows.GEN_KINDS))
    p.add_argument("--out", help="output JSON-lines path (default <kind>.jsonl)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=1000,
                   help="positives (and negatives) for the digit generators")
    p.add_argument("--n-pos", type=int, default=200)
    p.add_argument("--n-neg", type=int, default=200)
    p.add_argument("--dim", type=int, default=30)
    p.add_argument("--noise-std", type=float, default=3.0)
    p.add_argument("--cluster-mean", type=float, default=3.0)
    p.add_argument("--cluster-std", type=float, default=1.0)
    p.add_argument("--signal-dims", type=int, default=10)
    p.add_argument("--mnist-images", help="IDX image file (noisy-digits)")
    p.add_argument("--mnist-labels", help="IDX label file (noisy-digits)")
    p.add_argument("--background-dir", help="directory of grayscale PGM images (noisy-digits)")

    p = sub.add_parser("fit", help="fit a contrastive subspace and write the model")
    p.add_argument("data", help="dataset path (.jsonl or .csv)")
    p.add_argument("--method", required=True, choices=["cpca", "cpca-star"])
    p.add_argument("--contrast", type=float, required=True, help="contrast weight in [0, 1]")
    p.add_argument("-k", dest="k", type=int, required=True, help="output dimension")
    p.add_argument("--out", default="model.json")
    p.add_argument("--center", action="store_true", help="subtract per-class means first")
    p.add_argument("--ridge", type=float, default=0.0,
                   help="explicit ridge added to the background matrix")
    p.add_argument("--projections-out", help="also write projected positives with tags")
    _add_data_options(p)

    p = sub.add_parser("stream", help="run the streaming solver over a dataset")
    p.add_argument("data")
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("-k", dest="k", type=int, required=True)
    p.add_argument("--eta", type=float, required=True, help="step size, in (0, tau)")
    p.add_argument("--tau", type=float, default=1.0)
    p.add_argument("--epochs", type=int, default=1)
    p.add_argument("--seeds", type=int, default=5, help="number of independent runs")
    p.add_argument("--seed-base", type=int, default=0)
    p.add_argument("--oracle", help="reference model (from fit) for the alignment trajectory")
    p.add_argument("--out", default="stream.csv")
    p.add_argument("--record-every", type=int, default=200)
    p.add_argument("--workers", type=int, default=4,
                   help="worker threads for the per-seed runs")
    _add_data_options(p)

    p = sub.add_parser("sweep", help="score a method across a contrast grid")
    p.add_argument("data")
    p.add_argument("--method", required=True, choices=["cpca", "cpca-star"])
    p.add_argument("--grid", default="0:1:51", help="start:end:points within [0, 1]")
    p.add_argument("-k", dest="k", type=int, required=True)
    p.add_argument("--metric", choices=["lda", "sym_kl"], default="lda")
    p.add_argument("--threshold", type=float, default=0.9)
    p.add_argument("--out", default="sweep", help="output prefix for .json and .csv")
    p.add_argument("--center", action="store_true")
    p.add_argument("--workers", type=int, default=4,
                   help="worker threads across grid points")
    _add_data_options(p)

    p = sub.add_parser("eval", help="projector alignment of two models, or model vs tagged data")
    p.add_argument("model_a")
    p.add_argument("model_b", nargs="?")
    p.add_argument("--data", help="tagged dataset to score the model on")
    p.add_argument("--json", action="store_true", dest="as_json")
    _add_data_options(p)

    p = sub.add_parser("plot", help="render a projections or report file to SVG")
    p.add_argument("input")
    p.add_argument("--kind", required=True, choices=list(workflows.PLOT_KINDS))
    p.add_argument("--out", default="plot.svg")
    p.add_argument("--threshold", type=float, help="override the report threshold (barcode)")

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    return parser


def _build_payload(args):
    if args.command == "gen":
        return "gen", {
            "kind": args.kind,
            "out_path": args.out or f"{args.kind}.jsonl",
            "seed": args.seed,
            "count": args.count,
            "n_pos": args.n_pos,
            "n_neg": args.n_neg,
            "dim": args.dim,
            "noise_std": args.noise_std,
            "cluster_mean": args.cluster_mean,
            "cluster_std": args.cluster_std,
            "signal_dims": args.signal_dims,
            "mnist_images": args.mnist_images,
            "mnist_labels": args.mnist_labels,
            "background_dir": args.background_dir,
        }
    if args.command == "fit":
        return "fit", {
            "data_path": args.data,
            "method": args.method,
            "contrast": args.contrast,
            "k": args.k,
            "out_model_path": args.out,
            "center": args.center,
            "ridge": args.ridge,
            "projections_out": args.projections_out,
            **_data_payload(args),
        }
    if args.command == "stream":
        return "stream", {
            "data_path": args.data,
            "beta": args.beta,
            "k": args.k,
            "eta": args.eta,
            "tau": args.tau,
            "epochs": args.epochs,
            "seeds": [args.seed_base + i for i in range(args.seeds)],
            "oracle_model_path": args.oracle,
            "out_report_path": args.out,
            "record_every": args.record_every,
            "max_workers": args.workers,
            **_data_payload(args),
        }
    if args.command == "sweep":
        return "sweep", {
            "data_path": args.data,
            "method": args.method,
            "grid_spec": args.grid,
            "k": args.k,
            "metric": args.metric,
            "threshold": args.threshold,
            "out_json": f"{args.out}.json",
            "out_csv": f"{args.out}.csv",
            "center": args.center,
            "max_workers": args.workers,
            **_data_payload(args),
        }
    if args.command == "eval":
        return "eval", {
            "model_a": args.model_a,
            "model_b": args.model_b,
            "data_path": args.data,
            **_data_payload(args),
        }
    if args.command == "plot":
        return "plot", {
            "input_path": args.input,
            "out_svg_path": args.out,
            "kind": args.kind,
            "threshold": args.threshold,
        }
    raise AssertionError(args.command)


def _print_result(args, result):
    cmd = args.command
    if cmd == "eval" and args.as_json:
        print(json.dumps(result, sort_keys=True))
        return
    if cmd == "gen":
        print(
            f"wrote {result['out_path']} "
            f"({result['n_pos']} positive / {result['n_neg']} negative, d={result['d']})"
        )
    elif cmd == "fit":
        print(f"model -> {result['out_model_path']}")
        print("eigenvalues: " + " ".join(f"{v:.6g}" for v in result["values"]))
        print(
            f"d={result['d']} positives={result['n_pos']} negatives={result['n_neg']}"
        )
        if result.get("dropped_rows"):
            print(f"dropped rows with missing cells: {result['dropped_rows']}")
        if result.get("lda_accuracy") is not None:
            print(f"LDA accuracy: {result['lda_accuracy']:.4f}")
        if result.get("sym_kl") is not None:
            print(f"symmetrized KL: {result['sym_kl']:.6g}")
        if result.get("projections_out"):
            print(f"projections -> {result['projections_out']}")
    elif cmd == "stream":
        print(f"trajectories -> {result['out_report_path']}")
        if result.get("warning"):
            print(f"warning: {result['warning']}", file=sys.stderr)
        if result.get("mean_final_alignment") is not None:
            print(
                f"final alignment: mean={result['mean_final_alignment']:.4f} "
                f"std={result['std_final_alignment']:.4f} "
                f"over {len(result['seeds'])} seeds ({result['steps']} steps)"
            )
        else:
            print("no steps taken (empty trajectory)")
    elif cmd == "sweep":
        print(f"report -> {result['out_json']}, {result['out_csv']}")
        print(
            f"good range width ({result['metric']} > {result['threshold']:g}): "
            f"{result['good_range_width']:.4f}"
        )
    elif cmd == "eval":
        if result.get("alignment") is not None:
            print(f"projector alignment: {result['alignment']:.6f}")
        else:
            print(f"LDA accuracy: {result['lda_accuracy']:.4f}")
            print(f"symmetrized KL: {result['sym_kl']:.6g}")
    elif cmd == "plot":
        print(f"wrote {result['out_svg_path']}")


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    if args.command == "serve":
        import uvicorn

        from .service import create_app

        uvicorn.run(create_app(), host=args.host, port=args.port)
        return 0

    client = HttpClient(args.server) if args.server else LocalClient()
    op, payload = _build_payload(args)
    try:
        result = client.post(op, payload)
    except ClientError as e:
        print(f"error ({e.kind}): {e}", file=sys.stderr)
        return EXIT_BY_KIND.get(e.kind, 3)
    _print_result(args, result)
    return 0


if __name__ == "__main__":
    sys.exit(main())
