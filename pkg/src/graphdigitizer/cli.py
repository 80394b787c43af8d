"""Command line: ``digitize``, ``filter``, ``synth`` and ``eval`` subcommands."""

from __future__ import annotations

import argparse
import dataclasses
import glob
import json
import logging
import os
import shutil
import sys
from concurrent.futures import ProcessPoolExecutor
from typing import List, Optional, Sequence, Tuple

from .errors import DigitizerError
from .evaluation import DEFAULT_COLOR_GATE, evaluate_directories
from .pipeline import (IMAGE_SUFFIXES, DigitizedGraph, PipelineConfig, digitize_file,
                       dumps_graph, filter_by_axis, filter_by_caption, graph_filename, image_stem,
                       load_config, write_atomic)
from .synth import corpus_specs, generate_chart, write_chart

log = logging.getLogger("graphdigitizer")


def list_images(input_dir: str) -> List[str]:
    names = sorted(os.listdir(input_dir))
    return [os.path.join(input_dir, n) for n in names
            if n.lower().endswith(IMAGE_SUFFIXES) and os.path.isfile(os.path.join(input_dir, n))]


def _process_one(args: Tuple[str, str, PipelineConfig]) -> Tuple[str, int, List[str]]:
    """Digitize one image and write its documents; returns (image, graph count, flags)."""
    image_path, out_dir, config = args
    stem = image_stem(image_path)
    graphs = digitize_file(image_path, config)
    for g in graphs:
        write_atomic(os.path.join(out_dir, graph_filename(stem, g.subfigure_index)), dumps_graph(g))
    caption = os.path.splitext(image_path)[0] + ".caption.txt"
    if os.path.exists(caption):
        shutil.copyfile(caption, os.path.join(out_dir, stem + ".caption.txt"))
    return image_path, len(graphs), sorted({f for g in graphs for f in g.flags})


def run_digitize(input_dir: str, out_dir: str, config: PipelineConfig) -> List[Tuple[str, int, List[str]]]:
    os.makedirs(out_dir, exist_ok=True)
    jobs = [(path, out_dir, config) for path in list_images(input_dir)]
    if config.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            return list(pool.map(_process_one, jobs))
    return [_process_one(job) for job in jobs]


def cmd_digitize(ns: argparse.Namespace) -> int:
    config = load_config(ns.config) if ns.config else PipelineConfig()
    if ns.jobs is not None:
        config = dataclasses.replace(config, jobs=ns.jobs)
    results = run_digitize(ns.input_dir, ns.out, config)
    total = sum(n for _, n, _ in results)
    for path, n, flags in results:
        if flags:
            log.info("%s: %d graph(s), flags %s", os.path.basename(path), n, ",".join(flags))
    print(f"{len(results)} image(s), {total} graph document(s) written to {ns.out}")
    return 0


def passing_graphs(out_dir: str, caption_keywords: Sequence[str] = (),
                   x_label: Optional[str] = None, y_label: Optional[str] = None,
                   x_max: Optional[float] = None, max_edit_ratio: float = 0.3) -> List[str]:
    passed = []
    for path in sorted(glob.glob(os.path.join(out_dir, "*.graph*.json"))):
        with open(path, encoding="utf-8") as fh:
            graph = DigitizedGraph.from_json(json.load(fh))
        if caption_keywords:
            stem = os.path.basename(path).rsplit(".graph", 1)[0]
            caption_path = os.path.join(out_dir, stem + ".caption.txt")
            if not os.path.exists(caption_path):
                continue
            with open(caption_path, encoding="utf-8") as fh:
                if not filter_by_caption(fh.read(), caption_keywords):
                    continue
        if not graph.series:
            continue
        if filter_by_axis(graph, x_label, y_label, max_edit_ratio, x_max):
            passed.append(path)
    return passed


def cmd_filter(ns: argparse.Namespace) -> int:
    for path in passing_graphs(ns.out_dir, ns.caption_keywords or (), ns.x_label, ns.y_label,
                               ns.x_max, ns.max_edit_ratio):
        print(path)
    return 0


def cmd_synth(ns: argparse.Namespace) -> int:
    specs = corpus_specs(ns.count, ns.seed, ns.min_color_dist, ns.noise)
    for i, spec in enumerate(specs):
        img, truth = generate_chart(spec)
        write_chart(ns.out, f"chart{i:04d}", img, truth)
    print(f"{len(specs)} chart(s) written to {ns.out}")
    return 0


def cmd_eval(ns: argparse.Namespace) -> int:
    report = evaluate_directories(ns.pred, ns.truth, ns.color_gate)
    text = json.dumps(report.to_json(), indent=1) + "\n"
    write_atomic(ns.report, text)
    sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="graphdigitizer",
                                     description="Extract numeric series from line-chart images.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("digitize", help="digitize every image in a directory")
    p.add_argument("input_dir")
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--jobs", type=int)
    p.set_defaults(func=cmd_digitize)

    p = sub.add_parser("filter", help="list graph documents passing the mining filters")
    p.add_argument("out_dir")
    p.add_argument("--caption-keywords", nargs="*")
    p.add_argument("--x-label")
    p.add_argument("--y-label")
    p.add_argument("--x-max", type=float)
    p.add_argument("--max-edit-ratio", type=float, default=0.3)
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("synth", help="write a synthetic chart corpus")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--min-color-dist", type=float, default=60.0)
    p.add_argument("--noise", action="store_true", help="anti-alias the data lines")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("eval", help="score digitize output against synthetic truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--report", required=True)
    p.add_argument("--color-gate", type=float, default=DEFAULT_COLOR_GATE)
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    ns = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return ns.func(ns)
    except (DigitizerError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
