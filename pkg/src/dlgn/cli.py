"""Command-line interface: ``dlgn train|eval|discretize|export|diagnose``.

Exit codes: 0 success, 1 user error, 2 numeric abort during training.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import checkpoint as ckpt
from .circuit import (CircuitError, eval_circuit_batch, eval_packed, export_netlist,
                      import_netlist, pack, simplify)
from .config import RunConfig, format_config, load_config, parse_config
from .data import DatasetError, ingest_dataset, load_dataset
from .init import InitScheme, init_iwp_logits, init_op_logits
from .network import (ConfigError, EncoderConfig, build_network, discretize_network,
                      thermometer_encode)
from .neuron import EstimatorKind, estimator_value, softmax
from .gates import GateError, TRUTH
from .train import (METRICS_HEADER, HISTOGRAM_BINS, AdamState, Dataset, NumericAbort,
                    Trainer, continuous_accuracy, discretized_accuracy, gate_output_histogram,
                    grad_norm_profile)

log = logging.getLogger("dlgn")

EXIT_OK, EXIT_USER, EXIT_NUMERIC = 0, 1, 2
CHECKPOINT_NAME = "checkpoint.dlgn"
CONCENTRATION_SAMPLES = 10_000


class UserError(Exception):
    pass


# --- helpers ----------------------------------------------------------------

def _run_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out_dir = args.out
    return cfg


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _set_threads(n: int | None) -> None:
    if not n:
        return
    if n < 1:
        raise UserError("--threads must be positive")
    from . import kernels
    if kernels.BACKEND_NAME == "numba":
        import numba
        numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


def _nonempty(data: Dataset, what: str) -> Dataset:
    if len(data) == 0:
        raise UserError(f"{what} dataset is empty")
    return data


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


# --- train ------------------------------------------------------------------

def cmd_train(args) -> int:
    cfg = _run_config(args)
    out = _out_dir(cfg)
    if args.resume:
        ck = ckpt.load(args.resume, expect=cfg.parametrization)
        saved = parse_config(ck.config_text)
        # the run's data and architecture come from the checkpoint
        for key in ("dataset", "test_dataset", "train_fraction", "thresholds"):
            setattr(cfg, key, getattr(saved, key))
        net, state, step = ck.net, ck.state, ck.step
    train, test = ingest_dataset(cfg.dataset, cfg.train_fraction, cfg.test_dataset)
    _nonempty(train, "training")
    tcfg = cfg.train_config()
    if not args.resume:
        ncfg = cfg.network_config(train.n_classes)
        net = build_network(ncfg, EncoderConfig(train.width, cfg.thresholds), cfg.seed)
        state, step = AdamState.zeros_like(net), 0
    elif net.encoder.input_dim != train.width:
        raise UserError("checkpoint input width does not match the dataset")
    text = format_config(cfg)
    (out / "config.txt").write_text(text)

    metrics_path = out / "metrics.csv"
    hist_path = out / "histograms.csv"
    if not args.resume or not metrics_path.exists():
        _write_csv(metrics_path, METRICS_HEADER, [])
        if cfg.histogram_layers:
            _write_csv(hist_path, ("step", "layer", "bin_lo", "bin_hi", "count"), [])
    trainer = Trainer(net, train, tcfg, test if len(test) else None, state, step)

    def on_eval(tr: Trainer) -> None:
        rec = tr.metrics.records[-1]
        with open(metrics_path, "a", newline="") as fh:
            csv.writer(fh, lineterminator="\n").writerow(rec.row())
        if cfg.histogram_layers:
            with open(hist_path, "a", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                for h in tr.metrics.histograms:
                    if h.step == rec.step:
                        for k, cnt in enumerate(h.counts):
                            w.writerow([h.step, h.layer, repr(float(h.edges[k])),
                                        repr(float(h.edges[k + 1])), int(cnt)])
        ckpt.save(out / CHECKPOINT_NAME,
                  ckpt.Checkpoint(tr.net, tr.state, tr.step, text, cfg.seed))

    try:
        metrics = trainer.run(on_eval=on_eval)
    except NumericAbort as exc:
        log.error("numeric abort at layer %d: %s", exc.layer, exc)
        print(f"error: numeric abort at layer {exc.layer}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    if metrics.records:
        fin = metrics.final
        print(f"step={fin.step} loss={fin.loss:.6f} train_acc={fin.train_acc:.4f} "
              f"train_acc_disc={fin.train_acc_disc:.4f}"
              + (f" test_acc={fin.test_acc:.4f} test_acc_disc={fin.test_acc_disc:.4f}"
                 if fin.test_acc is not None else ""))
    return EXIT_OK


# --- eval -------------------------------------------------------------------

def _select_split(cfg: RunConfig, spec: str | None, which: str) -> Dataset:
    if spec and which == "all":
        return load_dataset(spec)
    dataset = spec or cfg.dataset
    if which == "all":
        return load_dataset(dataset)
    train, test = ingest_dataset(dataset, cfg.train_fraction,
                                 None if spec else cfg.test_dataset)
    return train if which == "train" else test


def cmd_eval(args) -> int:
    cfg = _run_config(args)
    if bool(args.netlist) == bool(args.checkpoint):
        raise UserError("give exactly one of --netlist or --checkpoint")
    if args.checkpoint:
        ck = ckpt.load(args.checkpoint)
        if not args.dataset and ck.config_text:
            cfg = parse_config(ck.config_text)
            if args.out is not None:
                cfg.out_dir = args.out
        thresholds = ck.net.encoder.thresholds
        circuit = discretize_network(ck.net)
    else:
        circuit = import_netlist(Path(args.netlist).read_text())
        thresholds = args.thresholds if args.thresholds is not None else cfg.thresholds
    data = _nonempty(_select_split(cfg, args.dataset, args.split), "evaluation")
    bits = thermometer_encode(data.features, thresholds) > 0.5
    if bits.shape[1] != circuit.input_width:
        raise UserError(f"encoded input width {bits.shape[1]} does not match the circuit's "
                        f"{circuit.input_width} inputs")
    t0 = time.perf_counter()
    if args.packed:
        scores = eval_packed(pack(circuit), bits)
    else:
        scores = eval_circuit_batch(circuit, bits)
    elapsed = time.perf_counter() - t0
    acc = float(np.mean(np.argmax(scores, axis=1) == data.labels))
    report = {"rows": len(data), "accuracy": acc, "packed": bool(args.packed),
              "seconds": elapsed, "rows_per_second": len(data) / elapsed if elapsed > 0 else None,
              "nodes": circuit.n_nodes}
    if args.checkpoint:
        report["continuous_accuracy"] = continuous_accuracy(
            ck.net, ck.net.encode(data.features), data.labels)
    print(json.dumps(report, sort_keys=True))
    if args.out is not None:
        (_out_dir(cfg) / "eval.json").write_text(json.dumps(report, sort_keys=True, indent=1) + "\n")
    return EXIT_OK


# --- discretize / export ----------------------------------------------------

def cmd_discretize_export(args, simplify_default: bool) -> int:
    cfg = _run_config(args)
    out = _out_dir(cfg)
    ck = ckpt.load(args.checkpoint)
    raw = discretize_network(ck.net)
    do_simplify = simplify_default if args.simplify is None else args.simplify
    final = simplify(raw) if do_simplify else raw
    target = Path(args.netlist_out) if args.netlist_out else out / "circuit.netlist"
    target.write_text(export_netlist(final))
    report = {
        "simplified": do_simplify,
        "nodes_before": raw.n_nodes,
        "nodes_after": final.n_nodes,
        "gate_histogram_before": {str(k): v for k, v in sorted(raw.gate_histogram().items())},
        "gate_histogram_after": {str(k): v for k, v in sorted(final.gate_histogram().items())},
        "netlist": str(target),
    }
    (out / "circuit_report.json").write_text(json.dumps(report, indent=1, sort_keys=True) + "\n")
    print(f"nodes_before={raw.n_nodes} nodes_after={final.n_nodes} netlist={target}")
    return EXIT_OK


# --- diagnose ---------------------------------------------------------------

def concentration_samples(seed: int, n: int = CONCENTRATION_SAMPLES, q: float = 0.5):
    """d_p of ``n`` freshly initialized neurons per scheme, second input held at ``q``."""
    rng = np.random.default_rng(seed)
    truth = TRUTH.astype(np.float64)
    est = EstimatorKind.SIN01
    schemes = {
        "op_gaussian_sigma1": ("op", InitScheme.gaussian(1.0)),
        "op_gaussian_sigma4": ("op", InitScheme.gaussian(4.0)),
        "op_residual": ("op", InitScheme.residual()),
        "iwp_gaussian_sigma1": ("iwp", InitScheme.gaussian(1.0)),
        "iwp_residual": ("iwp", InitScheme.residual()),
        "iwp_and_or": ("iwp", InitScheme.and_or()),
    }
    result = {}
    for name, (kind, scheme) in schemes.items():
        if kind == "op":
            V = softmax(init_op_logits(scheme, n, rng), axis=1) @ truth
        else:
            V = estimator_value(est, init_iwp_logits(scheme, est, n, rng))
        result[name] = (1 - q) * (V[:, 2] - V[:, 0]) + q * (V[:, 3] - V[:, 1])
    return result


def cmd_diagnose(args) -> int:
    cfg = _run_config(args)
    out = _out_dir(cfg)
    which = [w.strip() for w in args.which.split(",") if w.strip()]
    known = {"gradnorms", "histograms", "gap", "concentration"}
    bad = set(which) - known
    if bad:
        raise UserError(f"unknown diagnostics {sorted(bad)}; choose from {sorted(known)}")
    needs_net = set(which) - {"concentration"}
    if needs_net:
        if not args.checkpoint:
            raise UserError(f"{sorted(needs_net)} need --checkpoint")
        ck = ckpt.load(args.checkpoint)
        net = ck.net
        run_cfg = parse_config(ck.config_text) if ck.config_text else cfg
        spec = args.dataset or run_cfg.dataset
        train, test = ingest_dataset(spec, run_cfg.train_fraction,
                                     None if args.dataset else run_cfg.test_dataset)
        _nonempty(train, "diagnostic")
        rows = np.random.default_rng(cfg.seed).permutation(len(train))[:args.rows]
        x, y = net.encode(train.features[rows]), train.labels[rows]
    if "gradnorms" in which:
        prof = grad_norm_profile(net, x, y)
        _write_csv(out / "gradnorms.csv", ("layer", "input_norm", "output_norm", "gate_gain"),
                   [[l + 1, repr(float(prof.input_norms[l])), repr(float(prof.output_norms[l])),
                     repr(float(prof.gate_gain[l]))] for l in range(len(net.layers))])
        print(f"gradnorms: end_to_end={prof.end_to_end:.6g}")
    if "histograms" in which:
        layers = args.layers or list(range(1, len(net.layers) + 1))
        rows_out = []
        for layer in layers:
            counts, edges = gate_output_histogram(net, x, layer, HISTOGRAM_BINS)
            rows_out += [[layer, repr(float(edges[k])), repr(float(edges[k + 1])), int(c)]
                         for k, c in enumerate(counts)]
        _write_csv(out / "histograms.csv", ("layer", "bin_lo", "bin_hi", "count"), rows_out)
    if "gap" in which:
        rows_out = []
        for split_name, d in (("train", train), ("test", test)):
            if len(d) == 0:
                continue
            xe = net.encode(d.features)
            cont = continuous_accuracy(net, xe, d.labels)
            disc = discretized_accuracy(net, xe, d.labels)
            rows_out.append([split_name, repr(cont), repr(disc), repr(cont - disc)])
            print(f"gap[{split_name}]: continuous={cont:.4f} discretized={disc:.4f}")
        _write_csv(out / "gap.csv", ("split", "continuous_acc", "discretized_acc", "gap"),
                   rows_out)
    if "concentration" in which:
        samples = concentration_samples(cfg.seed)
        _write_csv(out / "concentration.csv", ("scheme", "sample", "d_p"),
                   [[name, i, repr(float(v))] for name, arr in samples.items()
                    for i, v in enumerate(arr)])
        summary = []
        for name, arr in samples.items():
            q25, med, q75 = np.percentile(arr, [25, 50, 75])
            summary.append([name, repr(float(q25)), repr(float(med)), repr(float(q75)),
                            repr(float(q75 - q25)), repr(float(np.median(np.abs(arr))))])
        _write_csv(out / "concentration_summary.csv",
                   ("scheme", "q25", "median", "q75", "iqr", "median_abs"), summary)
    return EXIT_OK


# --- entry point ------------------------------------------------------------

def _int_list(s: str) -> list[int]:
    try:
        return [int(v) for v in s.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {s!r}")


def build_parser() -> argparse.ArgumentParser:
    def globals_(parser, default):
        # subcommands repeat the global flags without clobbering earlier values
        parser.add_argument("--config", default=default,
                            help="run configuration file (key = value lines)")
        parser.add_argument("--seed", type=int, default=default, help="override the configured seed")
        parser.add_argument("--out", default=default, help="output directory (overrides out_dir)")
        parser.add_argument("--threads", type=int, default=default, help="kernel thread count")
        parser.add_argument("-v", "--verbose", action="store_true",
                            default=False if default is None else default)
        return parser

    common = globals_(argparse.ArgumentParser(add_help=False), argparse.SUPPRESS)
    p = globals_(argparse.ArgumentParser(
        prog="dlgn", description="Train and compile differentiable logic gate networks."), None)
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", parents=[common], help="train a network")
    t.add_argument("--resume", help="checkpoint to continue from")

    e = sub.add_parser("eval", parents=[common], help="evaluate a netlist or checkpoint")
    e.add_argument("--netlist")
    e.add_argument("--checkpoint")
    e.add_argument("--dataset", help="dataset spec; defaults to the configured one")
    e.add_argument("--split", choices=("train", "test", "all"), default="test")
    e.add_argument("--packed", action="store_true", help="use the 64-lane bit-packed evaluator")
    e.add_argument("--thresholds", type=int, help="thermometer thresholds for netlist inputs")

    for name, default in (("discretize", False), ("export", True)):
        d = sub.add_parser(name, parents=[common],
                           help=f"write a netlist from a checkpoint "
                                f"({'simplified' if default else 'unsimplified'} by default)")
        d.add_argument("--checkpoint", required=True)
        d.add_argument("--netlist-out")
        g = d.add_mutually_exclusive_group()
        g.add_argument("--simplify", dest="simplify", action="store_true", default=None)
        g.add_argument("--no-simplify", dest="simplify", action="store_false")

    g = sub.add_parser("diagnose", parents=[common], help="gradient and activation diagnostics")
    g.add_argument("--checkpoint")
    g.add_argument("--dataset")
    g.add_argument("--which", default="gradnorms,histograms,gap,concentration")
    g.add_argument("--rows", type=int, default=100)
    g.add_argument("--layers", type=_int_list)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        _set_threads(args.threads)
        if args.command == "train":
            return cmd_train(args)
        if args.command == "eval":
            return cmd_eval(args)
        if args.command == "discretize":
            return cmd_discretize_export(args, simplify_default=False)
        if args.command == "export":
            return cmd_discretize_export(args, simplify_default=True)
        return cmd_diagnose(args)
    except NumericAbort as exc:
        print(f"error: numeric abort at layer {exc.layer}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (UserError, ConfigError, DatasetError, CircuitError, GateError,
            ckpt.CheckpointError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USER


if __name__ == "__main__":
    sys.exit(main())
