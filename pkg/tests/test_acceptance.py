"""Acceptance suite: one test per criterion, each printing a summary line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines. The full face-corpus reproduction is criterion 8 and lives in
``test_repro.py`` behind the ``repro`` marker.
"""

import shutil

import numpy as np
import pytest

from mlcsc import ops
from mlcsc.cli import main as cli_main
from mlcsc.data import (
    gaussian_local_mean,
    local_contrast_normalize,
    write_pgm,
)
from mlcsc.fista import FistaParams, fista_solve
from mlcsc.model import (
    SparseCode,
    atom_norms,
    compose_effective,
    normalize_atoms,
    project_down,
)
from mlcsc.training import TrainingConfig, TrainingState, fit, init_model, train_step
from mlcsc.data import make_batches

from conftest import (
    dense_synthesis_matrix,
    finite_difference_gradient,
    ista_dense,
    random_model,
    synthetic_corpus,
)
from test_data import naive_gaussian_mean


def report(criterion: int, message: str) -> None:
    print(f"PASS criterion {criterion}: {message}")


def test_criterion_1_effective_dictionary_size_law():
    model = init_model([(8, 8), (16, 16)], seed=0)
    eff = compose_effective(model, 2)
    assert eff.atoms.shape == (16, 1, 23, 23)
    report(1, "8x8 composed with 16x16 kernels gives 23x23 atoms exactly")


def test_criterion_2_adjoint_suite():
    rng = np.random.default_rng(202)
    worst = 0.0
    for trial in range(120):
        num_atoms = int(rng.integers(1, 5))
        channels = int(rng.integers(1, 5))
        kh, kw = int(rng.integers(1, 6)), int(rng.integers(1, 6))
        mh, mw = int(rng.integers(1, 7)), int(rng.integers(1, 7))
        atoms = rng.standard_normal((num_atoms, channels, kh, kw))
        x = rng.standard_normal((num_atoms, mh, mw))
        y = rng.standard_normal((channels, mh + kh - 1, mw + kw - 1))
        lhs = float((ops.synthesize(atoms, x) * y).sum())
        rhs = float((x * ops.analyze(atoms, y)).sum())
        rel = abs(lhs - rhs) / (np.linalg.norm(x) * np.linalg.norm(y))
        worst = max(worst, rel)
        assert rel < 1e-10
    report(2, f"120 random synthesize/analyze pairs, worst relative error {worst:.2e}")


def test_criterion_3_gradient_matches_finite_differences():
    rng = np.random.default_rng(303)
    worst = 0.0
    for toy in range(20):
        k1 = int(rng.integers(2, 4))
        k2 = int(rng.integers(2, 4))
        a1 = int(rng.integers(1, 3))
        a2 = int(rng.integers(1, 3))
        model = random_model(rng, [(a1, (k1, k1)), (a2, (k2, k2))])
        h = int(rng.integers(k1 + k2 - 1, 11))
        w = int(rng.integers(k1 + k2 - 1, 11))
        code_shape = model.code_shape((h, w))
        code = SparseCode(rng.standard_normal(code_shape) * 0.7, layer_index=2)
        y = rng.standard_normal((h, w))

        from mlcsc.training import data_term_gradient
        from mlcsc.model import LayerDictionary, MlcscModel

        for layer in (1, 2):
            grad = data_term_gradient(model, code, y, layer)

            def objective(atoms, layer=layer):
                layers = list(model.layers)
                layers[layer - 1] = LayerDictionary(atoms, layer)
                eff = compose_effective(MlcscModel(layers=tuple(layers)), 2)
                recon = ops.synthesize(eff.atoms, code.maps)[0]
                return float(((y - recon) ** 2).sum())

            fd = finite_difference_gradient(
                objective, model.layers[layer - 1].atoms, h=1e-5
            )
            rel = np.abs(grad - fd).max() / max(np.abs(fd).max(), 1e-12)
            worst = max(worst, rel)
            assert rel < 1e-5
    report(3, f"20 two-layer toys, worst gradient relative error {worst:.2e}")


def test_criterion_4_fista_matches_ista_oracle_and_wins():
    rng = np.random.default_rng(404)
    worst_gap = 0.0
    for instance in range(10):
        atoms = rng.standard_normal((2, 1, 3, 3))
        atoms, _ = normalize_atoms(atoms)
        from mlcsc.model import EffectiveDictionary

        eff = EffectiveDictionary(atoms=atoms, depth=1)
        y = rng.standard_normal((6, 6))
        y *= 1.5 / np.linalg.norm(y)
        penalty = 0.05

        mat = dense_synthesis_matrix(atoms, (4, 4))
        _, oracle_trace = ista_dense(mat, y.ravel(), penalty, iters=50_000)
        oracle_final = oracle_trace[-1]

        result = fista_solve(
            y, eff, FistaParams(penalty=penalty, max_iters=5000, rel_tol=1e-14)
        )
        gap = abs(result.objective_trace[-1] - oracle_final)
        worst_gap = max(worst_gap, gap)
        assert gap < 1e-6

        ista_hits = next(
            k for k, f in enumerate(oracle_trace) if f - oracle_final <= 1e-4
        )
        fista_hits = next(
            k for k, f in enumerate(result.objective_trace)
            if f - oracle_final <= 1e-4
        )
        assert fista_hits < ista_hits
    report(4, f"10 instances, worst objective gap to 50k-iteration ISTA {worst_gap:.2e}")


def test_criterion_5_composition_consistency():
    worst = 0.0
    for depth in (2, 3):
        rng = np.random.default_rng(500 + depth)
        for trial in range(6):
            arch = [
                (int(rng.integers(1, 4)),
                 (int(rng.integers(1, 4)), int(rng.integers(1, 4))))
                for _ in range(depth)
            ]
            model = random_model(rng, arch)
            code = SparseCode(
                rng.standard_normal((model.layers[-1].num_atoms, 4, 4)),
                layer_index=depth,
            )
            current = code
            for layer in range(depth, 1, -1):
                current = project_down(current, model, layer)
            layerwise = ops.synthesize(model.layers[0].atoms, current.maps)
            eff = compose_effective(model, depth)
            effective = ops.synthesize(eff.atoms, code.maps)
            rel = np.linalg.norm(layerwise - effective) / np.linalg.norm(layerwise)
            worst = max(worst, rel)
            assert rel < 1e-9
    report(5, f"effective vs descending synthesis, worst relative error {worst:.2e}")


def test_criterion_6_unit_norm_after_every_step():
    rng = np.random.default_rng(606)
    dataset = [rng.standard_normal((10, 10)) for _ in range(4)]
    cfg = TrainingConfig(
        learning_rate=0.05,
        dict_thresholds=(0.01,),
        epochs=50,
        batch_size=2,
        seed=6,
        fista=FistaParams(penalty=0.05, max_iters=40, rel_tol=1e-7,
                          lipschitz_iters=20, seed=3),
    )
    state = TrainingState(
        model=init_model([(2, 3), (2, 2)], seed=61),
        epoch=0,
        metrics_history=[],
        rng=np.random.default_rng(cfg.seed),
    )
    steps = 0
    worst = 0.0
    for epoch in range(cfg.epochs):
        shuffle_seed = int(state.rng.integers(0, 2**63 - 1))
        for batch in make_batches(len(dataset), cfg.batch_size, shuffle_seed):
            for idx in batch:
                state, _ = train_step(state, dataset[idx], cfg)
                steps += 1
                for lyr in state.model.layers:
                    dev = float(np.abs(atom_norms(lyr) - 1.0).max())
                    worst = max(worst, dev)
                    assert dev <= 1e-8
    assert steps == cfg.epochs * len(dataset)
    report(6, f"{steps} steps over 50 epochs, worst atom-norm deviation {worst:.2e}")


@pytest.mark.slow
def test_criterion_7_synthetic_recovery():
    truth = random_model(np.random.default_rng(5), [(4, (3, 3)), (4, (3, 3))])
    dataset = synthetic_corpus(truth, 32, (16, 16), density=0.05, seed=11)
    cfg = TrainingConfig(
        learning_rate=0.1,
        dict_thresholds=(1e-4,),
        epochs=200,
        batch_size=8,
        seed=1,
        fista=FistaParams(penalty=0.05, max_iters=80, rel_tol=1e-7,
                          lipschitz_iters=20, seed=2),
    )
    init = init_model([(4, 3), (4, 3)], seed=99)
    _, metrics = fit(dataset, cfg, init)
    ratio = metrics[-1].mse / metrics[0].mse
    assert ratio <= 0.10
    report(7, f"200-epoch synthetic run: final/epoch-1 MSE ratio {ratio:.4f}")


ACCEPT_CONFIG = """
[model]
architecture = 2@3x3, 2@2x2

[data]
source = {data}
image_size = 12x12
lcn_window = 5

[training]
learning_rate = 0.02
dict_thresholds = 0.0001
epochs = 4
batch_size = 2
seed = 7

[fista]
penalty = 0.05
max_iters = 40
rel_tol = 1e-8
lipschitz_iters = 20
seed = 1

[output]
directory = {out}
checkpoint_every = 2
"""


def test_criterion_9_determinism_and_resume(tmp_path):
    rng = np.random.default_rng(909)
    data_dir = tmp_path / "data"
    for s in range(4):
        sub = data_dir / f"s{s + 1}"
        sub.mkdir(parents=True)
        write_pgm(sub / "1.pgm", rng.random((16, 16)))
    out = tmp_path / "out"
    cfg = tmp_path / "run.cfg"
    cfg.write_text(ACCEPT_CONFIG.format(data=data_dir, out=out))

    assert cli_main(["train", "--config", str(cfg)]) == 0
    final_first = (out / "ckpt-00004.ckpt").read_bytes()
    middle = tmp_path / "middle.ckpt"
    shutil.copy(out / "ckpt-00002.ckpt", middle)
    shutil.rmtree(out)

    assert cli_main(["train", "--config", str(cfg)]) == 0
    assert (out / "ckpt-00004.ckpt").read_bytes() == final_first
    shutil.rmtree(out)

    assert cli_main(["train", "--config", str(cfg), "--resume", str(middle)]) == 0
    assert (out / "ckpt-00004.ckpt").read_bytes() == final_first
    report(9, "repeat runs and checkpoint resume are byte-identical")


def test_criterion_10_lcn_properties():
    rng = np.random.default_rng(1010)
    for level in (0.0, 0.5, 1.0):
        out = local_contrast_normalize(np.full((20, 20), level), window=9)
        assert np.abs(out).max() < 1e-6

    # The mean removed by the subtractive step at interior pixels must be
    # the true Gaussian window mean (independent nested-loop oracle), i.e.
    # each window recentered by it has Gaussian-weighted mean ~ 0.
    window = 5
    half = window // 2
    worst = 0.0
    for trial in range(3):
        img = rng.random((15, 13))
        removed = gaussian_local_mean(img, window)
        oracle = naive_gaussian_mean(img, window)
        interior = (slice(half, -half), slice(half, -half))
        dev = float(np.abs(removed[interior] - oracle[interior]).max())
        worst = max(worst, dev)
        assert dev < 1e-6
    report(10, f"constant images map to zero; worst interior mean residual {worst:.2e}")
