"""Independent oracles and the self-check command built on them.

Everything here is deliberately written against the *definitions*, not the
production code paths: quadratic loops instead of streaming counters,
finite differences instead of backward rules, exhaustive enumeration
instead of dynamic programming. The production modules must agree with
these to tight tolerances.
"""
from __future__ import annotations

import itertools
import math

import numpy as np

from . import autograd as ag
from .errors import ContractError


# ---------------------------------------------------------------------------
# brute-force mining oracle

def brute_cooccurrence(sentences, seed_words, window: int) -> dict:
    """O(n^2)-per-sentence recount of (word, seed) events and totals."""
    pair_counts = {}
    word_counts = {}
    seed_event_counts = {}
    n_tokens = 0
    n_events = 0
    seed_words = set(seed_words)
    for toks in sentences:
        n_tokens += len(toks)
        for t in toks:
            word_counts[t] = word_counts.get(t, 0) + 1
        for i in range(len(toks)):
            for j in range(len(toks)):
                if i == j or abs(i - j) > window:
                    continue
                if toks[j] in seed_words:
                    n_events += 1
                    key = (toks[i], toks[j])
                    pair_counts[key] = pair_counts.get(key, 0) + 1
                    seed_event_counts[toks[j]] = seed_event_counts.get(toks[j], 0) + 1
    return {"pair": pair_counts, "word": word_counts, "seed_events": seed_event_counts,
            "n_tokens": n_tokens, "n_events": n_events}


def brute_pmi(counts: dict, word: str, seed: str, smoothing: float) -> float:
    """Interpolated PMI recomputed from raw brute-force counts."""
    c_ws = counts["pair"].get((word, seed), 0)
    c_w = counts["word"].get(word, 0)
    c_s = counts["word"].get(seed, 0)
    if c_ws == 0 or c_w == 0 or c_s == 0:
        raise ContractError("pmi undefined without co-occurrence")
    p_ws = c_ws / counts["n_events"]
    p_w = c_w / counts["n_tokens"]
    p_s = c_s / counts["n_tokens"]
    ratio = p_ws / (p_w * p_s)
    return math.log((1.0 - smoothing) * ratio + smoothing)


def brute_polarity(counts: dict, pos_seeds, neg_seeds, word: str,
                   smoothing: float):
    """Signed PMI sum over seeds that actually co-occur; None if none do."""
    total = 0.0
    seen = False
    for s in pos_seeds:
        if counts["pair"].get((word, s), 0) > 0:
            total += brute_pmi(counts, word, s, smoothing)
            seen = True
    for s in neg_seeds:
        if counts["pair"].get((word, s), 0) > 0:
            total -= brute_pmi(counts, word, s, smoothing)
            seen = True
    return total if seen else None


# ---------------------------------------------------------------------------
# finite-difference gradient oracle

def fd_gradient(f, x: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    """Central differences of a scalar function, element by element."""
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        keep = flat[i]
        flat[i] = keep + eps
        hi = f(x)
        flat[i] = keep - eps
        lo = f(x)
        flat[i] = keep
        gf[i] = (hi - lo) / (2.0 * eps)
    return g


def check_gradients(build, params: dict, eps: float = 1e-6,
                    rtol: float = 1e-4, atol: float = 1e-8) -> dict:
    """Compare backward() against finite differences for every parameter.

    build() -> scalar Tensor, reading the live `params` dict. Returns
    per-parameter max relative error; raises on violation.
    """
    loss = build()
    ag.zero_grads(params)
    loss.backward()
    analytic = {k: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data))
                for k, p in params.items()}
    report = {}
    for name in sorted(params):
        p = params[name]

        def f(x, _p=p):
            old = _p.data
            _p.data = x
            try:
                with ag.no_grad():
                    return float(build().data)
            finally:
                _p.data = old

        num = fd_gradient(f, p.data.copy(), eps)
        a = analytic[name]
        denom = np.maximum(np.abs(num), np.abs(a))
        err = np.abs(num - a) / np.maximum(denom, atol / rtol)
        worst = float(err.max()) if err.size else 0.0
        report[name] = worst
        if worst > rtol:
            raise ContractError(f"gradient mismatch on {name}: rel err {worst:.3e}")
    return report


# ---------------------------------------------------------------------------
# exhaustive CRF oracle

def enumerate_log_partition(emissions, trans, start, end) -> float:
    e = np.asarray(emissions, dtype=np.float64)
    T, K = e.shape
    scores = []
    for seq in itertools.product(range(K), repeat=T):
        s = start[seq[0]] + e[0, seq[0]]
        for t in range(1, T):
            s += trans[seq[t - 1], seq[t]] + e[t, seq[t]]
        s += end[seq[-1]]
        scores.append(s)
    m = max(scores)
    return m + math.log(sum(math.exp(s - m) for s in scores))


def enumerate_best_path(emissions, trans, start, end):
    """(best score, lexicographically-first argmax sequence)."""
    e = np.asarray(emissions, dtype=np.float64)
    T, K = e.shape
    best, best_seq = -math.inf, None
    for seq in itertools.product(range(K), repeat=T):
        s = start[seq[0]] + e[0, seq[0]]
        for t in range(1, T):
            s += trans[seq[t - 1], seq[t]] + e[t, seq[t]]
        s += end[seq[-1]]
        if s > best:  # strict: ties keep the lexicographically first sequence
            best, best_seq = s, list(seq)
    return best, best_seq


# ---------------------------------------------------------------------------
# self-check suites (used by the CLI command)

def run_selftest(verbose: bool = True) -> list:
    """Fast internal consistency checks; returns (name, ok, detail) rows."""
    from .crf import CrfParams, crf_log_partition, crf_viterbi
    from .miner import SeedSet, collect_stats

    rows = []

    def record(name, fn):
        try:
            detail = fn()
            rows.append((name, True, detail or ""))
        except Exception as exc:  # noqa: BLE001 - report, do not abort
            rows.append((name, False, f"{type(exc).__name__}: {exc}"))
        if verbose:
            name_, ok, detail = rows[-1]
            print("  %-34s %s %s" % (name_, "ok" if ok else "FAIL", detail))

    def mining_check():
        rng = np.random.default_rng(123)
        vocab = ["good", "bad", "fine", "thing", "stuff", "very", "meh"]
        sents = [[vocab[i] for i in rng.integers(0, len(vocab), rng.integers(3, 9))]
                 for _ in range(60)]
        seeds = SeedSet({"good"}, {"bad"})
        stats = collect_stats(sents, seeds, window=4)
        brute = brute_cooccurrence(sents, seeds.all, window=4)
        if stats.n_events != brute["n_events"]:
            raise ContractError("event count mismatch")
        worst = 0.0
        for w in vocab:
            got = mine_polarity(stats, seeds, w)
            want = brute_polarity(brute, seeds.positive, seeds.negative, w, 0.1)
            if (got is None) != (want is None):
                raise ContractError(f"definedness mismatch for {w}")
            if got is not None:
                worst = max(worst, abs(got - want) / max(abs(want), 1e-12))
        if worst > 1e-9:
            raise ContractError(f"polarity rel err {worst:.2e}")
        return f"rel err <= {worst:.1e}"

    def mine_polarity(stats, seeds, w):
        from .miner import polarity_score
        return polarity_score(stats, seeds, w, 0.1)

    def gradient_check():
        rng = np.random.default_rng(5)
        params = {"w": ag.parameter(rng.normal(size=(4, 3))),
                  "b": ag.parameter(rng.normal(size=3))}
        x = rng.normal(size=(2, 4))

        def build():
            z = ag.add(ag.matmul(ag.Tensor(x), params["w"]), params["b"])
            return ag.mul(ag.tsum(ag.log_softmax(z, axis=-1)), -1.0)

        rep = check_gradients(build, params)
        return "max rel err %.1e" % max(rep.values())

    def crf_check():
        rng = np.random.default_rng(9)
        e = rng.normal(size=(3, 4))
        tr = rng.normal(size=(4, 4))
        st = rng.normal(size=4)
        en = rng.normal(size=4)
        crf = CrfParams(ag.Tensor(tr), ag.Tensor(st), ag.Tensor(en))
        got = float(crf_log_partition(ag.Tensor(e), crf).data)
        want = enumerate_log_partition(e, tr, st, en)
        if abs(got - want) > 1e-8:
            raise ContractError(f"log partition off by {abs(got - want):.2e}")
        best, seq = enumerate_best_path(e, tr, st, en)
        vit = crf_viterbi(e, tr, st, en)
        if vit != seq:
            raise ContractError(f"viterbi {vit} != enumerated {seq}")
        return "exact"

    record("mining vs brute-force counter", mining_check)
    record("autograd vs finite differences", gradient_check)
    record("crf vs exhaustive enumeration", crf_check)
    return rows
