"""Acceptance gate: one test per headline guarantee, one printed line each.

Every test prints PASS/FAIL with its measured numbers through the capture
bypass so the gate summary is always visible in the pytest output.
"""

import sys
import time

import numpy as np
import pytest

from coz.backends import NearestBackend, RemoteSRBackend
from coz.chain import ZoomConfig, make_initial_state, run_chain
from coz.factorization import random_instance, verify_ar2_factorization
from coz.geometry import NEAREST, zoom_window
from coz.grpo import (
    ToyPromptPolicy,
    group_advantages,
    policy_gradient,
    surrogate_objective,
    train_toy,
)
from coz.metrics import MetricEngine
from coz.niqe import estimate_aggd, fit_niqe_model, niqe
from coz.prompts import (
    SINGLE_IMAGE_TEMPLATE,
    TWO_IMAGE_TEMPLATE,
    VlmPrompter,
    tokenize,
)
from coz.rewards import (
    phrase_exclusion_reward,
    repetition_penalty,
    total_reward,
)
from coz.synth import add_gaussian_noise, synth_corpus, synth_image
from coz.wire import (
    DimensionError,
    MetricClient,
    PromptClient,
    SRClient,
    TransportError,
    save_png,
)

REPETITIVE_PROMPT = (
    "fur texture orange background animal fur close-up pattern "
    "texture orange fur texture orange fur background orange fur "
    "texture orange fur background orange fur texture orange fur "
    "texture orange fur texture orange fur texture orange fur texture "
    "orange fur texture orange fur texture orange fur texture orange "
    "fur texture orange fur texture orange fur texture orange fur ..."
)

VIEWPOINT_PROMPT = (
    "The second image shows a close-up view of a surface with a "
    "textured pattern. The texture appears to be a combination of "
    "smooth and slightly raised areas, giving it a somewhat wavy or "
    "ripple-like appearance. The color gradient ranges from a lighter "
    "shade at the top to a darker shade at the bottom, creating a sense "
    "of depth and dimension."
)


def _report(capsys, name: str, passed: bool, detail: str = "") -> None:
    line = f"[{'PASS' if passed else 'FAIL'}] {name}"
    if detail:
        line += f" ({detail})"
    with capsys.disabled():
        print(line, flush=True)


def test_factorization_oracle(capsys):
    t0 = time.perf_counter()
    worst = 0.0
    for seed in range(100):
        inst = random_instance(np.random.default_rng(seed))
        worst = max(worst, verify_ar2_factorization(inst))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-12 and elapsed < 5.0
    _report(capsys, "factorization oracle", ok, f"max err {worst:.2e}, {elapsed:.2f}s for 100 instances")
    assert worst <= 1e-12
    assert elapsed < 5.0


def test_geometry_factors_and_rects(capsys):
    img = np.random.default_rng(0).random((512, 512, 3))
    x0 = make_initial_state(img, 512)
    cfg = ZoomConfig(scale_s=4, recursions_n=4, base_resolution=512, backend_id="nearest")
    t = run_chain(x0, cfg, NearestBackend(), _null_prompter())
    factors = tuple(int(s.cumulative_factor) for s in t.states[1:])
    sides = tuple(s.source_rect.w for s in t.states[1:])
    ok = factors == (4, 16, 64, 256) and sides == (128, 32, 8, 2)
    _report(capsys, "zoom geometry", ok, f"factors {factors}, window sides {sides}")
    assert factors == (4, 16, 64, 256)
    assert sides == (128, 32, 8, 2)


def _null_prompter():
    from coz.prompts import NullPrompter

    return NullPrompter()


def test_nearest_chain_composition(capsys):
    t0 = time.perf_counter()
    matched = 0
    for seed in range(10):
        img = np.random.default_rng(seed).random((512, 512, 3))
        x0 = make_initial_state(img, 512)
        cfg = ZoomConfig(scale_s=4, recursions_n=4, base_resolution=512, backend_id="nearest")
        t = run_chain(x0, cfg, NearestBackend(), _null_prompter())
        if np.array_equal(t.states[-1].image, zoom_window(img, 256, NEAREST)):
            matched += 1
    elapsed = time.perf_counter() - t0
    ok = matched == 10 and elapsed < 10.0
    _report(capsys, "nearest chain composition", ok, f"{matched}/10 pixel-identical, {elapsed:.2f}s")
    assert matched == 10
    assert elapsed < 10.0


def test_reward_suite_exactness(capsys):
    checks = []
    checks.append(phrase_exclusion_reward(VIEWPOINT_PROMPT) == 0)
    checks.append(phrase_exclusion_reward("fur") == 1)
    rep = repetition_penalty(REPETITIVE_PROMPT, 3)
    checks.append(rep <= -0.5)

    rng = np.random.default_rng(0)
    in_range = 0
    for _ in range(10_000):
        total = total_reward(
            float(rng.uniform(0, 1)), int(rng.integers(0, 2)), float(rng.uniform(-1, 0))
        ).total
        if -0.5 - 1e-12 <= total <= 1.5 + 1e-12:
            in_range += 1
    checks.append(in_range == 10_000)

    from collections import Counter

    vocab = ["fur", "orange", "texture", "sand", "wave", "edge", "grain", "leaf"]
    oracle_exact = 0
    for i in range(1_000):
        r = np.random.default_rng(1_000 + i)
        tokens = [vocab[j] for j in r.integers(0, len(vocab), size=int(r.integers(0, 25)))]
        text = " ".join(tokens)
        n = int(r.integers(1, 5))
        toks = tokenize(text)
        grams = [tuple(toks[k:k + n]) for k in range(len(toks) - n + 1)]
        expected = -(1.0 - len(Counter(grams)) / len(grams)) if grams else 0.0
        if repetition_penalty(text, n) == expected:
            oracle_exact += 1
    checks.append(oracle_exact == 1_000)

    ok = all(checks)
    _report(
        capsys,
        "reward exactness",
        ok,
        f"phrase 0/1 pinned, repetition {rep:.4f} <= -0.5, "
        f"{in_range}/10000 totals in range, {oracle_exact}/1000 oracle-exact",
    )
    assert ok


def test_grpo_guarantees(capsys):
    rng = np.random.default_rng(0)
    worst_sum = 0.0
    for _ in range(200):
        rewards = rng.uniform(-0.5, 1.5, size=int(rng.integers(2, 12))).tolist()
        worst_sum = max(worst_sum, abs(sum(group_advantages(rewards))))
    sums_ok = worst_sum <= 1e-9

    grad_ok = True
    worst_rel = 0.0
    for trial in range(10):
        r = np.random.default_rng(trial)
        logits = r.normal(size=5)
        sampled = [int(g) for g in r.integers(0, 5, size=4)]
        rewards = r.uniform(-0.5, 1.5, size=4)
        advantages = (rewards - rewards.mean()).tolist()
        grad = policy_gradient(logits, sampled, advantages)
        eps = 1e-6
        for k in range(5):
            up, dn = logits.copy(), logits.copy()
            up[k] += eps
            dn[k] -= eps
            fd = (
                surrogate_objective(up, sampled, advantages)
                - surrogate_objective(dn, sampled, advantages)
            ) / (2 * eps)
            rel = abs(grad[k] - fd) / max(1.0, abs(fd))
            worst_rel = max(worst_rel, rel)
            if rel > 1e-5:
                grad_ok = False

    def scorer(text):
        if text == "good":
            return total_reward(1.0, 1, 0.0)  # total 1.5
        return total_reward(0.0, 0, -1.0)  # total -0.5

    policy = ToyPromptPolicy.uniform(["good", "bad"], learning_rate=0.1)
    train_toy(policy, scorer, iterations=500, n_gen=2, seed=0)
    p_best = float(policy.probs()[0])
    bandit_ok = p_best > 0.99

    improved = 0
    for seed in range(20):
        p = ToyPromptPolicy.uniform(["good", "bad"], learning_rate=0.05)
        curve = train_toy(p, scorer, iterations=200, n_gen=2, seed=seed)
        if curve[-1]["expected_reward"] > curve[0]["expected_reward"]:
            improved += 1
    curve_ok = improved >= 19

    ok = sums_ok and grad_ok and bandit_ok and curve_ok
    _report(
        capsys,
        "group-relative policy loop",
        ok,
        f"advantage sums <= {worst_sum:.1e}, gradient rel err {worst_rel:.1e}, "
        f"P(best) {p_best:.4f} after 500 steps, improved {improved}/20 seeds",
    )
    assert ok


def test_niqe_statistics(capsys):
    gauss = estimate_aggd(np.random.default_rng(0).standard_normal(100_000))
    lap = estimate_aggd(np.random.default_rng(1).laplace(0.0, 1.0, 100_000))
    aggd_ok = abs(gauss.alpha - 2.0) <= 0.1 and abs(lap.alpha - 1.0) <= 0.1

    corpus = synth_corpus(20, seed=0)
    model = fit_niqe_model(corpus)
    raised = 0
    for i, img in enumerate(corpus):
        clean = niqe(img, model)
        noisy = niqe(add_gaussian_noise(img, 0.1, seed=i), model)
        if noisy > clean:
            raised += 1
    noise_ok = raised >= 18  # >= 90% of 20

    refit = fit_niqe_model(corpus)
    refit_ok = (
        model.mu.tobytes() == refit.mu.tobytes()
        and model.sigma.tobytes() == refit.sigma.tobytes()
    )

    ok = aggd_ok and noise_ok and refit_ok
    _report(
        capsys,
        "quality statistics",
        ok,
        f"alpha {gauss.alpha:.3f}/{lap.alpha:.3f} vs 2/1, noise raised {raised}/20, "
        f"refit byte-identical {refit_ok}",
    )
    assert ok


def test_protocol_conformance(capsys, stub_server):
    img = np.random.default_rng(7).random((64, 64, 3))
    backend = RemoteSRBackend(SRClient(stub_server.url, timeout_s=5.0))
    prompter = VlmPrompter(PromptClient(stub_server.url, timeout_s=5.0))
    x0 = make_initial_state(img, 64)
    cfg = ZoomConfig(
        scale_s=2, recursions_n=2, base_resolution=64, prompt_mode="vlm", backend_id="remote"
    )
    t = run_chain(x0, cfg, backend, prompter, image_id="gate")
    chain_ok = t.complete and not t.errors

    prompt_log = stub_server.state.requests_to("/v1/prompt")
    templates_ok = (
        prompt_log[0]["template_text"] == SINGLE_IMAGE_TEMPLATE
        and prompt_log[1]["template_text"] == TWO_IMAGE_TEMPLATE
    )
    sr_log = stub_server.state.requests_to("/v1/sr")
    ids_ok = [r["request_id"] for r in sr_log] == ["gate-step1", "gate-step2"]

    stub_server.state.sr_mode = "wrong_dim"
    client = SRClient(stub_server.url, timeout_s=5.0)
    try:
        client.upscale(img, prompt="", scale=2, seed=0, request_id="dim-check")
        dim_ok = False
    except DimensionError:
        dim_ok = True

    stub_server.state.sr_mode = "sleep"
    stub_server.state.sleep_s = 1.0
    slow = SRClient(stub_server.url, timeout_s=0.25)
    try:
        slow.upscale(img, prompt="", scale=2, seed=0, request_id="slow-check")
        timeout_ok = False
    except TransportError:
        timeout_ok = True

    stub_server.state.metric_mode = "http_404"
    engine = MetricEngine(client=MetricClient(stub_server.url, timeout_s=5.0))
    rep = engine.report("sub", img, ["niqe", "musiq"])
    substitution_ok = rep.scores["niqe"] == 100.0 and rep.scores["musiq"] == 0.0

    ok = chain_ok and templates_ok and ids_ok and dim_ok and timeout_ok and substitution_ok
    _report(
        capsys,
        "wire conformance",
        ok,
        f"chain complete {chain_ok}, templates byte-equal {templates_ok}, "
        f"ids {ids_ok}, typed dim/timeout {dim_ok}/{timeout_ok}, "
        f"substitution 100.0/0.0 {substitution_ok}",
    )
    assert ok


def test_eval_byte_determinism(capsys, tmp_path):
    from coz.cli import main

    in_dir = tmp_path / "in"
    in_dir.mkdir()
    for i in range(8):
        save_png(synth_image(500 + i), in_dir / f"img{i}.png")

    t0 = time.perf_counter()
    codes = []
    for run in ("a", "b"):
        codes.append(
            main(
                [
                    "eval",
                    "--input-dir", str(in_dir),
                    "--output-dir", str(tmp_path / f"out_{run}"),
                    "--methods", "nn_interp,coz_null",
                    "--metrics", "niqe",
                    "--scale", "4",
                    "--recursions", "4",
                    "--base-resolution", "512",
                    "--backend", "bicubic",
                ]
            )
        )
    elapsed = time.perf_counter() - t0

    csv_a = (tmp_path / "out_a" / "report.csv").read_bytes()
    csv_b = (tmp_path / "out_b" / "report.csv").read_bytes()
    identical = csv_a == csv_b
    complete = len(csv_a.decode().strip().splitlines()) == 1 + 4 * 2  # header + rows
    # extreme magnifications legitimately degenerate into substituted cells,
    # so exit 2 (partial) is acceptable; exit 1 (config) is not
    codes_ok = all(c in (0, 2) for c in codes)
    ok = identical and complete and codes_ok and elapsed < 120.0
    _report(
        capsys,
        "eval determinism",
        ok,
        f"CSV byte-identical {identical}, {len(csv_a)} bytes, "
        f"exit codes {codes}, {elapsed:.1f}s for two runs",
    )
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
