# Copyright 2024 tokengraph authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#    http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
import argparse
import os
import sys
from typing import Any, Callable, Dict, List, Sequence, Tuple

from .controller import FORMATS, Controller, RunConfig, default_output_dir
from .detect import (AnfScope, DetectionConfig, FactorKind, WindowSearchConfig,
                     classify, rank, write_reports_csv)
from .exceptions import (InvalidConfigException, TokenGraphException,
                         UsageException)
from .graph import (DegreeSelector, activeness_distribution, concentration_stats,
                    degree_distribution, fit_power_law, graph_summary,
                    memo_word_frequencies, mutual_pairs, pagerank,
                    subgraph_density, top_nodes, write_edge_list)
from .ingest import IngestConfig, dataset_stats
from .synth import ScenarioSpec, generate
from .utility import get_logger, write_csv, write_json

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2

GRAPH_KINDS = ("tcg", "tccg", "thg", "ttg", "cttg", "acg")

_logger = get_logger("Cli")


class _ArgumentParser(argparse.ArgumentParser):
    """ArgumentParser raising UsageException instead of exiting"""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise UsageException(message)


def _add_input_arguments(parser: argparse.ArgumentParser):
    for kind in ["transfers", "issues", "creates", "accounts"]:
        parser.add_argument('--{}'.format(kind), help='{} log file (repeatable)'.format(kind),
                            action='append', default=[], metavar='PATH')
    parser.add_argument('--data-dir', help='directory holding the logs with the default names',
                        action='append', default=[], metavar='DIR')
    parser.add_argument('--out', help='output directory', type=str, default=default_output_dir())
    parser.add_argument('--format', help='output format of tables', choices=FORMATS, default="json")
    parser.add_argument('--threads', help='worker threads', type=int, default=os.cpu_count() or 1)
    parser.add_argument('--log-level', help='log level', type=str, default="INFO")
    parser.add_argument('--stream', help='re-read transfers from disk instead of keeping them in memory',
                        action='store_true')
    parser.add_argument('--reorder-buffer', help='records held to repair local disorder', type=int,
                        default=10_000)
    parser.add_argument('--progress', help='show a progress bar while reading', action='store_true')


def _add_graph_arguments(parser: argparse.ArgumentParser, activeness: bool = True):
    kinds = GRAPH_KINDS + ("activeness",) if activeness else GRAPH_KINDS
    parser.add_argument('--kind', help='graph (or token activeness) to analyse', choices=kinds, default="ttg")
    parser.add_argument('--selector', help='degree notion', choices=[s.value for s in DegreeSelector],
                        default=None)
    parser.add_argument('--weighted', help='sum edge weights (transfer graphs only)', action='store_true')
    parser.add_argument('-k', help='number of center accounts of the CTTG', type=int, default=14)


def _parse_arguments(argv: Sequence[str]) -> Dict[str, Any]:
    """Function to declare and parse command line arguments

    Returns:
        Dict[str, any]: The dictionary of arguments.
    """
    parser = _ArgumentParser(prog="tokengraph", formatter_class=argparse.ArgumentDefaultsHelpFormatter)

    sub_parsers = parser.add_subparsers(
        title="Action",
        description="Select the action",
        dest="action",
        required=True)

    tmp = sub_parsers.add_parser("stats", help="dataset counters and activity concentration")
    _add_input_arguments(tmp)
    tmp.add_argument('--threshold', help='activeness threshold of the concentration summary', type=int,
                     default=100)
    tmp.add_argument('--top-fraction', help='share of top tokens of the concentration summary', type=float,
                     default=0.01)

    tmp = sub_parsers.add_parser("graph", help="build a graph and write its edge list")
    _add_input_arguments(tmp)
    _add_graph_arguments(tmp, activeness=False)

    for action, text in [("degrees", "write a degree distribution"), ("fit", "fit a power law to a distribution")]:
        tmp = sub_parsers.add_parser(action, help=text)
        _add_input_arguments(tmp)
        _add_graph_arguments(tmp)
        if action == "degrees":
            tmp.add_argument('--top-n', help='also rank the nodes (or tokens) with highest degree', type=int,
                             default=None)

    tmp = sub_parsers.add_parser("pagerank", help="weighted PageRank of the transfer graph")
    _add_input_arguments(tmp)
    tmp.add_argument('--damping', type=float, default=0.85)
    tmp.add_argument('--tol', type=float, default=1e-10)
    tmp.add_argument('--max-iter', type=int, default=200)
    tmp.add_argument('--top-n', help='accounts written, all if omitted', type=int, default=None)

    tmp = sub_parsers.add_parser("cttg", help="center transfer graph of the top-k accounts")
    _add_input_arguments(tmp)
    tmp.add_argument('-k', help='number of center accounts', type=int, default=14)

    tmp = sub_parsers.add_parser("patterns", help="mutual transfers and density among the center accounts")
    _add_input_arguments(tmp)
    tmp.add_argument('-k', help='number of center accounts', type=int, default=14)
    tmp.add_argument('--min-weight', help='minimum transfers in each direction', type=int, default=1)

    tmp = sub_parsers.add_parser("memo", help="word frequencies of the memos")
    _add_input_arguments(tmp)
    tmp.add_argument('--top-n', help='words written, all if omitted', type=int, default=None)
    tmp.add_argument('--no-issues', help='ignore issue memos', action='store_true')

    tmp = sub_parsers.add_parser("detect", help="compute the factors of every token and flag suspicious ones")
    _add_input_arguments(tmp)
    tmp.add_argument('-W', '--window-size', help='actions per window', type=int, default=100_000)
    tmp.add_argument('-P', '--pieces', help='pieces per window', type=int, default=10)
    tmp.add_argument('--attnf-threshold', type=float, default=50)
    tmp.add_argument('--mttqf-threshold', type=float, default=10_000)
    tmp.add_argument('--whole-history', help='compute the factors over all actions', action='store_true')
    tmp.add_argument('--anf-scope', help='scope of the ANF denominator', choices=[s.value for s in AnfScope],
                     default=AnfScope.GLOBAL.value)

    tmp = sub_parsers.add_parser("synth", help="generate a labeled synthetic scenario")
    defaults = ScenarioSpec()
    tmp.add_argument('--out', help='output directory', type=str, default=default_output_dir())
    tmp.add_argument('--log-level', help='log level', type=str, default="INFO")
    for name, value in vars(defaults).items():
        kwargs: Dict[str, Any] = {"dest": "spec_" + name, "default": value}
        if isinstance(value, bool) or value is None:
            kwargs["type"] = str
        else:
            kwargs["type"] = type(value)
        tmp.add_argument('--' + name.replace('_', '-'), **kwargs)
    return vars(parser.parse_args(argv))


def _run_config(args: Dict[str, Any]) -> RunConfig:
    config = RunConfig(
        transfers=list(args["transfers"]), issues=list(args["issues"]),
        creates=list(args["creates"]), accounts=list(args["accounts"]),
        out_dir=args["out"], fmt=args["format"], threads=args["threads"], log_level=args["log_level"],
        ingest=IngestConfig(retain_transfers=not args["stream"], reorder_buffer=args["reorder_buffer"],
                            threads=args["threads"], progress=args["progress"]))
    for path in args["data_dir"]:
        config.add_data_dir(path)
    return config


def _write_table(ctrl: Controller, name: str, header: List[str], rows: List[Sequence[Any]]) -> str:
    if ctrl.config.fmt == "csv":
        path = ctrl.output(name + ".csv")
        write_csv(path, header, rows)
    else:
        path = ctrl.output(name + ".json")
        write_json(path, [dict(zip(header, r)) for r in rows])
    return path


def _selector(args: Dict[str, Any], default: DegreeSelector) -> DegreeSelector:
    return DegreeSelector(args["selector"]) if args["selector"] else default


def _degree_graph(ctrl: Controller, args: Dict[str, Any]) -> Tuple[Any, DegreeSelector]:
    g = ctrl.cttg(args["k"]) if args["kind"] == "cttg" else ctrl.graph(args["kind"])
    default = DegreeSelector.RIGHT if args["kind"] in ("tcg", "tccg", "thg") else DegreeSelector.IN
    return g, _selector(args, default)


def _distribution(ctrl: Controller, args: Dict[str, Any]) -> Dict[Any, int]:
    if args["kind"] == "activeness":
        return activeness_distribution(ctrl.token_stats())
    g, selector = _degree_graph(ctrl, args)
    return degree_distribution(g, selector, weighted=args["weighted"])


def _top(ctrl: Controller, args: Dict[str, Any]) -> List[Tuple[Any, Any]]:
    n = args["top_n"]
    if n < 0:
        raise UsageException("--top-n must be >= 0")
    if args["kind"] == "activeness":
        ranked = sorted(ctrl.token_stats(), key=lambda s: (-s.activeness, str(s.token)))
        return [(s.token, s.activeness) for s in ranked[:n]]
    g, selector = _degree_graph(ctrl, args)
    return top_nodes(g, selector, n, weighted=args["weighted"])


def _stats(ctrl: Controller, args: Dict[str, Any]) -> str:
    stats = dataset_stats(ctrl.dataset)
    per_token = ctrl.token_stats()
    concentration = concentration_stats(per_token).summary(args["threshold"], args["top_fraction"]) \
        if per_token else None
    write_json(ctrl.output("stats.json"), {"dataset": stats, "concentration": concentration,
                                           "files": ctrl.dataset.reports_json()})
    _write_table(ctrl, "token_stats", ["token", "activeness", "n_holders", "issue_total"],
                 [(s.token, s.activeness, s.n_holders, s.issue_total) for s in per_token])
    return "{} transfers, {} issues, {} creates, {} account creations, {} tokens".format(
        stats.n_transfers, stats.n_issues, stats.n_creates, stats.n_account_creations, stats.n_tokens)


def _graph(ctrl: Controller, args: Dict[str, Any]) -> str:
    g = ctrl.cttg(args["k"]) if args["kind"] == "cttg" else ctrl.graph(args["kind"])
    write_edge_list(g, ctrl.output("{}_edges.csv".format(args["kind"])))
    summary = graph_summary(g)
    write_json(ctrl.output("{}_summary.json".format(args["kind"])), summary)
    return "{}: {} edges".format(args["kind"], summary["n_edges"])


def _degrees(ctrl: Controller, args: Dict[str, Any]) -> str:
    hist = _distribution(ctrl, args)
    _write_table(ctrl, "{}_degrees".format(args["kind"]), ["x", "y"], sorted(hist.items()))
    if args["top_n"] is not None:
        _write_table(ctrl, "{}_top".format(args["kind"]), ["node", "degree"], _top(ctrl, args))
    return "{}: {} distinct values".format(args["kind"], len(hist))


def _fit(ctrl: Controller, args: Dict[str, Any]) -> str:
    fit = fit_power_law(_distribution(ctrl, args))
    write_json(ctrl.output("{}_fit.json".format(args["kind"])), fit)
    return "{}: beta={:.4f} r2={:.4f} over {} points".format(args["kind"], fit.beta, fit.r_squared, fit.n_points)


def _pagerank(ctrl: Controller, args: Dict[str, Any]) -> str:
    result = pagerank(ctrl.ttg(), args["damping"], args["tol"], args["max_iter"])
    ranked = sorted(result.scores.items(), key=lambda x: (-x[1], x[0]))
    if args["top_n"] is not None:
        ranked = ranked[:max(args["top_n"], 0)]
    _write_table(ctrl, "pagerank", ["account", "score"], ranked)
    return "pagerank: {} accounts, {} iterations, converged={}".format(
        len(result.scores), result.iterations, result.converged)


def _cttg(ctrl: Controller, args: Dict[str, Any]) -> str:
    g = ctrl.cttg(args["k"])
    write_edge_list(g, ctrl.output("cttg_edges.csv"))
    write_json(ctrl.output("cttg_summary.json"), graph_summary(g))
    return "cttg: {} accounts, {} edges".format(len(g), len(g.edges))


def _patterns(ctrl: Controller, args: Dict[str, Any]) -> str:
    g = ctrl.cttg(args["k"])
    pairs = mutual_pairs(g, args["min_weight"])
    density = subgraph_density(ctrl.ttg(), g.nodes) if len(g) >= 2 else None
    write_json(ctrl.output("patterns.json"), {"k": args["k"], "accounts": g.nodes,
                                              "mutual_pairs": pairs, "density": density})
    return "patterns: {} mutual pairs among {} accounts".format(len(pairs), len(g))


def _memo(ctrl: Controller, args: Dict[str, Any]) -> str:
    words = memo_word_frequencies(ctrl.dataset, args["top_n"], include_issues=not args["no_issues"])
    _write_table(ctrl, "memo_words", ["word", "count"], words)
    return "memo: {} words".format(len(words))


def _detect(ctrl: Controller, args: Dict[str, Any]) -> str:
    config = DetectionConfig(
        window=WindowSearchConfig(args["window_size"], args["pieces"], FactorKind.ATTNF),
        attnf_threshold=args["attnf_threshold"], mttqf_threshold=args["mttqf_threshold"],
        whole_history=args["whole_history"], anf_scope=AnfScope(args["anf_scope"]))
    reports = rank(ctrl.detect(config))
    suspicious = classify(reports, config.attnf_threshold, config.mttqf_threshold)
    write_json(ctrl.output("reports.json"), reports)
    write_reports_csv(reports, ctrl.output("reports.csv"))
    write_json(ctrl.output("suspicious.json"), [str(r.token) for r in suspicious])
    return "detect: {} tokens analysed, {} suspicious".format(len(reports), len(suspicious))


def _synth(args: Dict[str, Any]) -> str:
    values = {}
    for name, default in vars(ScenarioSpec()).items():
        value = args["spec_" + name]
        if default is None and value in ("", "none", "None"):
            value = None
        values[name] = value
    truth = generate(ScenarioSpec(**values), args["out"], log_level=args["log_level"])
    return "synth: {} tokens ({} manipulated), {} transfers in {}".format(
        len(truth.labels), len(truth.manipulated), truth.expected_counts["transfer"], args["out"])


_ACTIONS: Dict[str, Callable[[Controller, Dict[str, Any]], str]] = {
    "stats": _stats, "graph": _graph, "degrees": _degrees, "fit": _fit, "pagerank": _pagerank,
    "cttg": _cttg, "patterns": _patterns, "memo": _memo, "detect": _detect,
}


def run(argv: Sequence[str] = None) -> int:
    """Function to run a sub-command, writing its outputs in the output
    directory and a one-line summary on stdout.

    Args:
        argv (Sequence[str], optional): The arguments, sys.argv[1:] if None. Defaults to None.

    Returns:
        int: 0 on success, 1 on usage errors, 2 on data errors.
    """
    try:
        args = _parse_arguments(argv)
        if args["action"] == "synth":
            summary = _synth(args)
        else:
            summary = _ACTIONS[args["action"]](Controller(_run_config(args)), args)
    except SystemExit as e:
        # --help
        return e.code if isinstance(e.code, int) else EXIT_OK
    except (UsageException, InvalidConfigException) as e:
        print("tokengraph: error: {}".format(e), file=sys.stderr)
        return EXIT_USAGE
    except TokenGraphException as e:
        _logger.error(e)
        return EXIT_DATA
    except OSError as e:
        _logger.error("I/O error: {}".format(e))
        return EXIT_DATA
    print(summary)
    return EXIT_OK


def main():
    """Main Function, the `tokengraph` console script."""
    sys.exit(run())


if __name__ == '__main__':
    main()
