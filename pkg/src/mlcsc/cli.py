"""Command-line interface: train, encode, reconstruct, export-figures.

Exit codes: 0 success, 2 bad configuration (with field diagnostics),
3 data errors, 4 numerical divergence (the last good checkpoint stays on
disk).
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import config as config_mod
from . import container, data, figures, ops
from .errors import ConfigError, DataError, DivergenceError, MlcscError
from .fista import fista_solve
from .model import SparseCode, compose_effective, normalize_atoms, project_down
from .training import TrainingState, continue_fit, init_model

logger = logging.getLogger(__name__)


def _write_metrics_csv(path, metrics_history, num_layers: int) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["epoch", "mse"]
            + [f"dict_density_{i}" for i in range(1, num_layers + 1)]
            + ["code_density", "mean_fista_iters"]
        )
        for epoch, m in enumerate(metrics_history, start=1):
            writer.writerow(
                [epoch, repr(m.mse)]
                + [repr(d) for d in m.dict_density]
                + [repr(m.code_density), repr(m.mean_fista_iters)]
            )


def _load_corpus_for(cfg: config_mod.RunConfig) -> data.Corpus:
    source = cfg.data_source or data.default_data_dir()
    if source is None:
        raise DataError(
            "no data source: set data.source in the config or MLCSC_DATA_DIR"
        )
    return data.load_corpus(
        source,
        image_size=cfg.image_size,
        lcn_window=cfg.lcn_window,
        lcn_epsilon=cfg.lcn_epsilon,
    )


def cmd_train(args) -> int:
    if args.resume:
        state, ckpt_config_text = container.load_checkpoint(args.resume)
        cfg = config_mod.parse_config(ckpt_config_text)
        logger.info("resuming from %s at epoch %d", args.resume, state.epoch)
    else:
        state = None
        cfg = config_mod.read_config(args.config)
    if args.seed is not None:
        cfg = config_mod.with_seed(cfg, args.seed)
    config_text = config_mod.serialize_config(cfg)
    corpus = _load_corpus_for(cfg)

    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    if state is None:
        h, w = corpus.images[0].shape
        model = init_model(
            cfg.architecture, seed=cfg.training.seed, input_shape=(1, h, w)
        )
        state = TrainingState(
            model=model,
            epoch=0,
            metrics_history=[],
            rng=np.random.default_rng(cfg.training.seed),
        )
        container.save_checkpoint(out_dir / "ckpt-00000.ckpt", state, config_text)

    num_layers = len(cfg.architecture)

    def on_epoch(st: TrainingState) -> None:
        _write_metrics_csv(out_dir / "metrics.csv", st.metrics_history, num_layers)
        if st.epoch % cfg.checkpoint_every == 0 or st.epoch == cfg.training.epochs:
            ckpt = out_dir / f"ckpt-{st.epoch:05d}.ckpt"
            container.save_checkpoint(ckpt, st, config_text)
            logger.info("wrote %s", ckpt)

    try:
        _, metrics = continue_fit(list(corpus.images), cfg.training, state, on_epoch)
    except DivergenceError as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        print("last good checkpoint retained in", out_dir, file=sys.stderr)
        return 4
    _write_metrics_csv(out_dir / "metrics.csv", metrics, num_layers)
    final = out_dir / f"ckpt-{cfg.training.epochs:05d}.ckpt"
    if not final.exists():
        container.save_checkpoint(final, state, config_text)
    print(f"trained {cfg.training.epochs} epochs; outputs in {out_dir}")
    return 0


def _model_from_checkpoint(path):
    state, config_text = container.load_checkpoint(path)
    return state, config_mod.parse_config(config_text)


def cmd_encode(args) -> int:
    state, cfg = _model_from_checkpoint(args.ckpt)
    if args.seed is not None:
        cfg = config_mod.with_seed(cfg, args.seed)
    model = state.model
    image = data.preprocess_image(
        args.image,
        image_size=cfg.image_size,
        lcn_window=cfg.lcn_window,
        lcn_epsilon=cfg.lcn_epsilon,
    )
    depth = model.num_layers
    eff = compose_effective(model, depth)
    eff_hat, norms = normalize_atoms(eff)
    result = fista_solve(image, eff_hat, cfg.training.fista)
    code = SparseCode(
        maps=result.code.maps / norms[:, None, None], layer_index=depth
    )
    arrays = {f"code_layer_{depth}": code.maps}
    if args.all_layers:
        current = code
        for layer in range(depth, 1, -1):
            current = project_down(current, model, layer)
            arrays[f"code_layer_{current.layer_index}"] = current.maps
    meta = {
        "image": str(args.image),
        "deepest_layer": depth,
        "fista_iterations": result.iterations_used,
        "converged": bool(result.converged),
    }
    container.save_arrays(args.out, "codes", arrays, meta)
    print(f"wrote {args.out} ({', '.join(sorted(arrays))})")
    return 0


def cmd_reconstruct(args) -> int:
    state, _ = _model_from_checkpoint(args.ckpt)
    model = state.model
    kind, arrays, _ = container.load_arrays(args.code)
    if kind != "codes":
        raise DataError(f"{args.code}: container holds {kind!r}, not codes")
    depth = model.num_layers
    name = f"code_layer_{depth}"
    if name not in arrays:
        raise DataError(f"{args.code}: missing tensor {name!r}")
    code = SparseCode(maps=arrays[name], layer_index=depth)
    eff = compose_effective(model, depth)
    recon = ops.synthesize(eff.atoms, code.maps)[0]
    figures.save_png(args.out, figures.scale_to_u8(recon))
    print(f"wrote {args.out}")
    return 0


def cmd_export_figures(args) -> int:
    state, cfg = _model_from_checkpoint(args.ckpt)
    model = state.model

    sample_pairs = []
    corpus = _load_corpus_for(cfg)
    eff = compose_effective(model, model.num_layers)
    eff_hat, _ = normalize_atoms(eff)
    eh, ew = eff_hat.kernel_shape
    first = corpus.images[0]
    map_shape = (first.shape[0] - eh + 1, first.shape[1] - ew + 1)
    op = ops.synthesis_operator(eff_hat.atoms, map_shape)
    lip = 1.05 * ops.operator_norm_sq(
        op, iters=cfg.training.fista.lipschitz_iters, seed=cfg.training.fista.seed
    )
    step = max(1, len(corpus.images) // args.samples)
    for image in corpus.images[:: step][: args.samples]:
        res = fista_solve(image, eff_hat, cfg.training.fista, lipschitz=lip)
        recon = ops.synthesize(eff_hat.atoms, res.code.maps)[0]
        sample_pairs.append((image, recon))

    written = figures.export_figures(
        model, state.metrics_history, args.out, sample_pairs=sample_pairs
    )
    print("\n".join(written))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mlcsc",
        description="Multi-layer convolutional sparse coding and dictionary learning",
    )
    parser.add_argument("--seed", type=int, default=None,
                        help="override the configured seeds")
    parser.add_argument("-v", "--verbose", action="store_true",
                        help="log per-epoch progress")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train dictionaries from a config file")
    p_train.add_argument("--config", required=True)
    p_train.add_argument("--resume", default=None,
                         help="checkpoint to continue from")
    p_train.set_defaults(func=cmd_train)

    p_encode = sub.add_parser("encode", help="sparse-code one image")
    p_encode.add_argument("--ckpt", required=True)
    p_encode.add_argument("--image", required=True)
    p_encode.add_argument("--out", required=True)
    p_encode.add_argument("--all-layers", action="store_true",
                          help="also export intermediate-layer codes")
    p_encode.set_defaults(func=cmd_encode)

    p_recon = sub.add_parser("reconstruct", help="render an exported code to PNG")
    p_recon.add_argument("--ckpt", required=True)
    p_recon.add_argument("--code", required=True)
    p_recon.add_argument("--out", required=True)
    p_recon.set_defaults(func=cmd_reconstruct)

    p_fig = sub.add_parser("export-figures",
                           help="write dictionary montages and metric charts")
    p_fig.add_argument("--ckpt", required=True)
    p_fig.add_argument("--out", required=True)
    p_fig.add_argument("--samples", type=int, default=8,
                       help="number of reconstruction examples")
    p_fig.set_defaults(func=cmd_export_figures)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except DivergenceError as exc:
        print(f"numerical divergence: {exc}", file=sys.stderr)
        return 4
    except MlcscError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
