"""Acceptance gate. Each test is one criterion; a PASS/FAIL line per criterion
is printed in the terminal summary."""

import math
import time

import numpy as np
import pytest

from arrivalnet import cli, model, neural
from arrivalnet.datagen import GeneratorSpec, generate, process_id
from arrivalnet.experiments import censoring_experiment, joint_experiment, recovery_experiment
from arrivalnet.grid import ArrivalSequence, SurvivalTarget, build_targets
from arrivalnet.io import read_transactions, write_transactions
from arrivalnet.metrics import phm08_loss, rmse, roc_auc
from arrivalnet.model import ModelConfig, activate_scale, activate_shape, total_loss
from arrivalnet.survival import WeibullParams, excess_survival, weibull_survival

from test_grid import naive_targets
from test_metrics import pairwise_auc


def network_loss(params, x, targets, config):
    raw, cache = neural.forward(params, x)
    loss, d_raw = model.loss_and_grad(raw, targets, config)
    return loss, neural.backward(params, cache, d_raw)


def random_problem(rng):
    hidden = int(rng.integers(1, 9))
    steps = int(rng.integers(1, 6))
    p = int(rng.integers(1, 3))
    batch = int(rng.integers(1, 4))
    n_in = int(rng.integers(1, 4))
    shape = (batch, steps, p)
    tse = rng.integers(0, 4, shape).astype(float)
    unc = rng.random(shape) < 0.5
    tte = rng.integers(0, 5, shape).astype(float)
    tte[unc] = np.maximum(tte[unc], 1)
    mask = rng.random(shape) < 0.8
    config = ModelConfig(p, tuple(rng.uniform(1, 5, p)), hidden=hidden, loss_mode=str(rng.choice(["matrnn", "wtte"])))
    params = neural.init_params(n_in, hidden, 2 * p, int(rng.integers(1000)))
    x = rng.normal(size=(batch, steps, n_in))
    return params, x, SurvivalTarget(tse, tte, unc, mask), config


@pytest.mark.criterion(1, "end-to-end gradient vs central differences")
def test_c1_gradients(request):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    checked = 0
    worst = 0.0  # error measured against the tolerance that applies to it
    for _ in range(20):
        params, x, tg, cfg = random_problem(rng)
        _, grads = network_loss(params, x, tg, cfg)
        for name in neural.LAYER_NAMES:
            flat = params[name].reshape(-1)
            for idx in range(flat.size):
                orig = flat[idx]
                h = 1e-5 * max(1.0, abs(orig))
                flat[idx] = orig + h
                up = network_loss(params, x, tg, cfg)[0]
                flat[idx] = orig - h
                down = network_loss(params, x, tg, cfg)[0]
                flat[idx] = orig
                num = (up - down) / (2 * h)
                ana = grads[name].reshape(-1)[idx]
                err = abs(ana - num)
                rel = err / max(abs(ana), abs(num), 1e-300)
                assert rel <= 1e-4 or err <= 1e-7, (name, idx, ana, num)
                worst = max(worst, min(rel / 1e-4, err / 1e-7))
                checked += 1
    elapsed = time.perf_counter() - t0
    request.node._detail = f"20 configs, {checked} weights, worst error {worst:.3f} of tolerance, {elapsed:.1f}s"
    assert elapsed < 60


@pytest.mark.criterion(2, "likelihood identities")
def test_c2_identities(request):
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(2000):
        lam, k = rng.uniform(0.3, 30), rng.uniform(0.2, 9.5)
        s, t = rng.uniform(0, 40, 2)
        p = WeibullParams(lam, k)
        worst = max(worst, abs(excess_survival(t, s, p) * weibull_survival(s, p) - weibull_survival(s + t, p)))
        e = WeibullParams(lam, 1.0)
        s2 = rng.uniform(0, 40)
        worst = max(worst, abs(excess_survival(t, s, e) - excess_survival(t, s2, e)))
    for _ in range(200):
        steps, p = int(rng.integers(1, 12)), int(rng.integers(1, 4))
        shape = (2, steps, p)
        unc = rng.random(shape) < 0.5
        tte = np.where(unc, rng.integers(1, 9, shape), rng.integers(0, 9, shape)).astype(float)
        tg = SurvivalTarget(np.zeros(shape), tte, unc, rng.random(shape) < 0.8)
        raw = rng.normal(size=(2, steps, 2 * p))
        mu = tuple(rng.uniform(1, 6, p))
        a = total_loss(raw, tg, ModelConfig(p, mu, hidden=1))
        b = total_loss(raw, tg, ModelConfig(p, mu, hidden=1, loss_mode="wtte"))
        worst = max(worst, abs(a - b))
    request.node._detail = f"worst abs deviation {worst:.1e}"
    assert worst <= 1e-12


@pytest.mark.criterion(3, "event-grid oracle and worked example")
def test_c3_event_grid(request):
    rng = np.random.default_rng(11)
    for _ in range(1000):
        tau = int(rng.integers(1, 201))
        n = int(rng.integers(0, min(20, tau) + 1))
        arr = tuple(sorted(rng.choice(np.arange(1, tau + 1), size=n, replace=False).tolist()))
        tg = build_targets(ArrivalSequence(arr, tau))
        got = list(zip(tg.tse.tolist(), tg.tte.tolist(), tg.uncensored.tolist(), tg.mask.tolist()))
        assert got == naive_targets(arr, tau)
    ex = build_targets(ArrivalSequence((16, 28, 32), 40))
    assert (ex.tse[19], ex.tte[19], bool(ex.uncensored[19])) == (4, 8, True)
    assert (ex.tse[34], ex.tte[34], bool(ex.uncensored[34])) == (3, 5, False)
    request.node._detail = "1000 random sets exact"


@pytest.mark.criterion(4, "parameter recovery on stationary data")
def test_c4_recovery(request):
    t0 = time.perf_counter()
    lam, k, n = recovery_experiment()
    elapsed = time.perf_counter() - t0
    request.node._detail = f"scale {lam:.3f}, shape {k:.3f}, {n} intervals, {elapsed:.0f}s"
    assert n >= 1000
    assert abs(lam - 5) / 5 <= 0.10
    assert abs(k - 1) <= 0.15
    assert elapsed < 300


@pytest.mark.criterion(5, "censoring advantage over squared loss")
def test_c5_censoring(request):
    t0 = time.perf_counter()
    out = censoring_experiment()
    elapsed = time.perf_counter() - t0
    gap = out["matrnn"] - out["sqloss"]
    request.node._detail = (
        f"censored {out['censoring_fraction']:.2f}, matrnn {out['matrnn']:.4f}, sqloss {out['sqloss']:.4f}, "
        f"gap {gap:+.4f}, {elapsed:.0f}s"
    )
    assert out["censoring_fraction"] >= 0.5
    assert gap >= 0.03
    assert elapsed < 600


@pytest.mark.criterion(6, "joint model at least as good as single models")
def test_c6_joint(request):
    t0 = time.perf_counter()
    out = joint_experiment()
    elapsed = time.perf_counter() - t0
    request.node._detail = f"joint {out['joint']:.4f}, single {out['single']:.4f}, {elapsed:.0f}s"
    assert out["joint"] >= out["single"]
    assert elapsed < 900


@pytest.mark.criterion(7, "metric oracles")
def test_c7_metrics(request):
    rng = np.random.default_rng(5)
    for _ in range(200):
        n = int(rng.integers(2, 501))
        scores = rng.integers(0, 25, n) / 5.0
        labels = rng.random(n) < rng.uniform(0.1, 0.9)
        labels[0], labels[-1] = True, False
        assert roc_auc(scores, labels) == pairwise_auc(scores, labels)
    assert abs(phm08_loss(10) - (math.e - 1)) <= 1e-12
    assert abs(phm08_loss(-13) - (math.e - 1)) <= 1e-12
    assert rmse([2.0, 4.0], [1.0, 1.0]) == math.sqrt((1 + 9) / 2)
    request.node._detail = "200 instances exact"


@pytest.mark.criterion(8, "activation anchors")
def test_c8_activations(request):
    assert activate_shape(0.0, 10.0) == 1.0
    k = activate_shape(np.linspace(-50, 50, 200001), 10.0)
    assert np.all(k > 0) and np.all(k < 10)
    assert activate_scale(0.0, 6.5) == 6.5
    assert activate_scale(0.0, 0.37) == 0.37


@pytest.mark.criterion(9, "determinism and generate/ingest round trip")
def test_c9_determinism(tmp_path, request):
    spec = tmp_path / "gen.cfg"
    spec.write_text("n_processes = 2\nscales = 3, 6\nshapes = 1.0, 2.0\nn_subjects = 25\nwindow = 30\n")
    data = tmp_path / "tx.csv"
    assert cli.main(["generate", "--config", str(spec), "--out", str(data), "--seed", "4"]) == 0
    run = tmp_path / "run.cfg"
    run.write_text("train_end = 26\nhidden = 4\niterations = 10\n")
    ckpts = []
    for name in ("a", "b"):
        ck = tmp_path / f"{name}.ckpt"
        assert cli.main(["train", "--config", str(run), "--input", str(data), "--checkpoint", str(ck), "--seed", "4"]) == 0
        ckpts.append(ck.read_bytes())
    assert ckpts[0] == ckpts[1]

    ds = generate(GeneratorSpec(n_processes=2, scales=(3.0, 6.0), shapes=(1.0, 2.0), n_subjects=25, window=30, seed=4))
    back = read_transactions(data)
    for subj in ds.subjects:
        for i, seq in enumerate(subj.sequences):
            assert ArrivalSequence.from_times(back.arrival_times(subj.subject_id, process_id(i)), 30) == seq
    rt = tmp_path / "rt.csv"
    write_transactions(rt, back)
    assert rt.read_bytes() == data.read_bytes()
