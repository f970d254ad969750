"""Exit criteria. Each test prints one PASS/FAIL line with its runtime."""
import json
import math

import numpy as np
import pytest

from convmix.cli import main
from convmix.corpus_io import Waveform, load_params, params_to_dict
from convmix.metrics import compare_datasets, dataset_stats, emd_1d, overlap_ratio, silence_ratio
from convmix.metrics import similarity_score
from convmix.render import AudioStore, RenderConfig, load_wav_dir, onset_sample, render_mixture
from convmix.sampling import (
    make_rng,
    next_transition,
    sample_exponential,
    sample_truncated_exponential,
)
from convmix.simulator import concat_and_sum_plan, draw_speaker_lists, simulate_plan
from convmix.synth import synth_noises, synth_pool
from convmix.timeline import (
    TransitionType,
    UtterancePool,
    annotation_from_plan,
    callhome1_params,
)

from oracles import emd_by_assignment, random_grid_annotation, rasterized_ratios
from test_sampling import quad_mean

pytestmark = pytest.mark.acceptance

TH, TS, IR, BC = TransitionType
N = 100_000
P_IND = np.array([0.15, 0.31, 0.44, 0.10])


def test_distribution_fidelity(criterion):
    with criterion(1, "distribution fidelity", 5):
        x = sample_exponential(0.57, make_rng(101), N)
        assert 0.555 <= x.mean() <= 0.585, x.mean()
        for beta in (0.10, 0.44):
            rho = sample_truncated_exponential(beta, 0.03, make_rng(102), N)
            assert rho.min() >= 0.03 and rho.max() <= 0.97
            ref = quad_mean(beta, 0.03)
            assert abs(rho.mean() - ref) / ref <= 0.02, (beta, rho.mean(), ref)


def test_selection_fidelity(criterion):
    params = callhome1_params()
    with criterion(2, "selection fidelity", 10):
        rng = make_rng(201)
        rparams = params.replace(mode="random")
        prev = None
        counts = np.zeros(4)
        for _ in range(N):
            prev = next_transition("random", prev, rparams, rng)
            counts[prev] += 1
        assert np.all(np.abs(counts / N - P_IND) <= 0.01), counts / N

        pm = np.array(params.p_markov)
        for j, cur in enumerate(TransitionType):
            rng = make_rng(202, j)
            counts = np.zeros(4)
            for _ in range(N):
                counts[next_transition("markov", cur, params, rng)] += 1
            assert np.all(np.abs(counts / N - pm[:, j]) <= 0.01), (cur.name, counts / N)


def _check_plan(plan, n_utt):
    """Structural invariants by replaying the step sequence."""
    placements = plan.placements
    assert len(placements) == n_utt
    # simultaneous utterances, by an event sweep over placements
    events = sorted([(p.onset, 1) for p in placements] + [(p.end, -1) for p in placements],
                    key=lambda e: (e[0], e[1]))
    active = peak = 0
    for _, d in events:
        active += d
        peak = max(peak, active)
    assert peak <= 2, f"{peak} simultaneous utterances"
    assert len({p.speaker for p in placements}) <= 2

    u_prev = placements[0]
    horizon = u_prev.end
    for p in placements[1:]:
        if p.transition in (TH, TS):
            assert p.onset >= horizon, "TH/TS step overlaps an earlier utterance"
        if p.transition == BC:
            assert u_prev.onset <= p.onset and p.end <= u_prev.end, "BC outside u_prev"
            before = u_prev
        if p.end > u_prev.end:
            u_prev = p
        if p.transition == BC:
            assert u_prev is before, "BC replaced u_prev"
        horizon = max(horizon, p.end)


def test_structural_invariants(criterion, pool):
    params = callhome1_params()
    with criterion(3, "structural invariants", 30):
        for seed in range(1000):
            _check_plan(simulate_plan(pool, params, seed), params.n_utt)


def test_statistics_ballpark(criterion, tmp_path):
    params = callhome1_params()
    with criterion(4, "dataset-statistics ballpark", 120):
        recs = synth_pool(tmp_path, n_speakers=20, per_speaker=50, mean=3.0, seed=4,
                          write_audio=False, shape="lognormal")
        pool = UtterancePool.from_records(recs)
        proposed = dataset_stats(annotation_from_plan(simulate_plan(pool, params, s))
                                 for s in range(200))
        baseline = []
        for s in range(200):
            lists = draw_speaker_lists(pool, 2, 15, make_rng(s, 1))
            baseline.append(annotation_from_plan(concat_and_sum_plan(lists, 2.0, s)))
        concat = dataset_stats(baseline)
        print(f"  proposed silence {proposed.silence_ratio:.3f} overlap {proposed.overlap_ratio:.3f};"
              f" concat-sum silence {concat.silence_ratio:.3f} overlap {concat.overlap_ratio:.3f}")
        assert 0.05 <= proposed.silence_ratio <= 0.15
        assert 0.09 <= proposed.overlap_ratio <= 0.18
        assert concat.overlap_ratio > proposed.overlap_ratio


def test_emd_oracle_equivalence(criterion, pool):
    with criterion(5, "EMD oracle equivalence", 30):
        rng = np.random.default_rng(501)
        worst = 0.0
        for _ in range(200):
            m, n = rng.integers(1, 31, 2)
            u = rng.exponential(rng.uniform(0.2, 2.0), m)
            v = rng.exponential(rng.uniform(0.2, 2.0), n)
            worst = max(worst, abs(emd_1d(u, v) - emd_by_assignment(u, v)))
        assert worst <= 1e-9, worst
        x = rng.exponential(1.0, 50)
        assert similarity_score(x, x) == 1.0
        st = dataset_stats(annotation_from_plan(simulate_plan(pool, callhome1_params(), s))
                           for s in range(20))
        r = compare_datasets(st, st)
        assert r["silence_similarity"] == 1.0 and r["overlap_similarity"] == 1.0


def _simulate(out, manifest, params_path, n, seed, workers=1, extra=()):
    rc = main(["simulate", "--pool", str(manifest), "--params", str(params_path), "--n", str(n),
               "--seed", str(seed), "--out", str(out), "--workers", str(workers), *extra])
    assert rc == 0


def test_round_trip_recovery(criterion, tmp_path):
    gen = callhome1_params()
    with criterion(6, "round-trip parameter recovery", 120):
        assert main(["synth-pool", "--out", str(tmp_path / "pool"), "--labels-only",
                     "--seed", "6"]) == 0
        manifest = tmp_path / "pool" / "manifest.jsonl"
        failures = []
        for mode in ("random", "markov"):
            p = gen.replace(mode=mode, p_markov=gen.p_markov if mode == "markov" else None)
            (tmp_path / f"{mode}.json").write_text(json.dumps(params_to_dict(p)))
            out = tmp_path / mode
            _simulate(out, manifest, tmp_path / f"{mode}.json", 500, 600, extra=["--labels-only"])
            assert main(["extract-stats", str(out / "rttm"), "--mode", mode,
                         "--out", str(tmp_path / f"{mode}.fit.json")]) == 0
            est = load_params(tmp_path / f"{mode}.fit.json")
            for t in (TH, TS):
                rel = abs(est.beta[t] - gen.beta[t]) / gen.beta[t]
                if rel > 0.10:
                    failures.append(f"{mode} beta {t.name} off by {rel:.1%}")
            if mode == "random":
                d = np.abs(np.array(est.p_ind) - P_IND)
                print(f"  random: max |P_ind error| {d.max():.3f}")
                if d.max() > 0.03:
                    failures.append(f"P_ind max error {d.max():.3f}")
            else:
                d = np.array(est.p_markov) - np.array(gen.p_markov)
                i, j = np.unravel_index(np.argmax(np.abs(d)), d.shape)
                print(f"  markov: max |P_Markov error| {abs(d[i, j]):.3f}"
                      f" at next={TransitionType(i).name} given {TransitionType(j).name}")
                for i, j in zip(*np.nonzero(np.abs(d) > 0.05)):
                    failures.append(f"P_Markov[{TransitionType(i).name}|{TransitionType(j).name}]"
                                    f" off by {d[i, j]:+.3f}")
        assert not failures, "; ".join(failures)


def test_ratio_oracle(criterion):
    with criterion(7, "ratio oracle", 10):
        rng = np.random.default_rng(701)
        for _ in range(100):
            a = random_grid_annotation(rng, n_segments=int(rng.integers(1, 30)))
            sil, ovl = rasterized_ratios(a)
            assert abs(silence_ratio(a) - sil) <= 1e-9
            assert abs(overlap_ratio(a) - ovl) <= 1e-9


def _label_mask(ann, n, rate):
    """Samples touched by any labeled segment."""
    m = np.zeros(n, dtype=bool)
    for s in ann.segments:
        m[math.floor(s.onset * rate):math.ceil(s.end * rate)] = True
    return m


def test_rendering_contract(criterion, tmp_path):
    rate = 8000
    with criterion(8, "rendering contract", 60):
        recs = synth_pool(tmp_path / "pool", n_speakers=4, per_speaker=40, seed=8, shape="lognormal")
        synth_noises(tmp_path / "noise", n=2, seconds=3.0, seed=8)
        noises = load_wav_dir(tmp_path / "noise")
        pool = UtterancePool.from_records(recs)
        audio = AudioStore({r.utterance_id: str(tmp_path / "pool" / r.path) for r in recs})
        identity = Waveform(np.r_[1.0, np.zeros(63)], rate)
        params = callhome1_params()
        worst = 0.0
        for k in range(20):
            plan = simulate_plan(pool, params, 800 + k)
            clean = render_mixture(plan, audio, RenderConfig(rirs=[identity]), k)
            x = clean.waveform.samples * (1 / clean.rescaled_by)
            labels = _label_mask(clean.annotation, len(x), rate)
            assert np.all(x[~labels] == 0), "energy outside labeled segments"

            snr = (5.0, 10.0, 15.0, 20.0)[k % 4]
            cfg = RenderConfig(rirs=[identity], noises=noises, snr_choices=(snr,))
            noisy = render_mixture(plan, audio, cfg, k)
            y = noisy.waveform.samples / noisy.rescaled_by
            noise = y - x
            active = np.zeros(len(x), dtype=bool)
            for p in plan.placements:
                s = onset_sample(p.onset, rate)
                active[s:s + int(round(p.duration * rate))] = True
            measured = 20 * math.log10(np.sqrt(np.mean(x[active] ** 2))
                                       / np.sqrt(np.mean(noise[active] ** 2)))
            worst = max(worst, abs(measured - snr))
        print(f"  worst SNR error {worst:.2e} dB")
        assert worst <= 0.5


def test_determinism(criterion, tmp_path):
    with criterion(9, "determinism (serial vs 8 workers)", 60):
        assert main(["synth-pool", "--out", str(tmp_path / "pool"), "--speakers", "6",
                     "--per-speaker", "40", "--shape", "lognormal", "--rirs", "2", "--noises", "2",
                     "--seed", "9"]) == 0
        pool_dir = tmp_path / "pool"
        (tmp_path / "p.json").write_text(json.dumps(params_to_dict(callhome1_params())))
        extra = ["--rir-dir", str(pool_dir / "rir"), "--noise-dir", str(pool_dir / "noise")]
        _simulate(tmp_path / "serial", pool_dir / "manifest.jsonl", tmp_path / "p.json", 24, 99,
                  1, extra)
        _simulate(tmp_path / "par", pool_dir / "manifest.jsonl", tmp_path / "p.json", 24, 99,
                  8, extra)
        compared = 0
        for sub, pattern in (("rttm", "*.rttm"), ("plan", "*.json"), ("wav", "*.wav")):
            a = sorted((tmp_path / "serial" / sub).glob(pattern))
            b = sorted((tmp_path / "par" / sub).glob(pattern))
            assert [f.name for f in a] == [f.name for f in b] and len(a) == 24
            for fa, fb in zip(a, b):
                assert fa.read_bytes() == fb.read_bytes(), fa.name
                compared += 1
        for name in ("mixtures.jsonl", "summary.json"):
            assert (tmp_path / "serial" / name).read_bytes() == (tmp_path / "par" / name).read_bytes()
        assert compared == 72
