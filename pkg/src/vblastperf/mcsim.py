"""Monte-Carlo simulator of an l x n V-BLAST receiver with ZF-SIC detection.

The simulator realizes the physical channel (i.i.d. entries with
Nakagami-m_N envelope, uniform phase, unit mean power) and detects with
zero-forcing nulling plus successive cancellation, optionally ordered by
post-processing SNR.  Error propagation is physical: the symbol that gets
subtracted is the detected one, right or wrong.

The analytic stage densities in fading.py model the post-processing SNR
through the normalized shape m = 2 n m_N; the simulator exists precisely
to probe that modeling step, so analytic/MC comparisons are made at the
level of trends and bound directions, never tight equality.

Reproducibility: every batch owns a counter-based Philox stream keyed by
(seed, grid-point index, batch index), and partial results are reduced in
batch order.  Estimates are therefore bit-identical for a given
(seed, config) no matter how many workers run the batches.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .error_rate import BINARY, ModulationScheme
from .fading import SystemModel

__all__ = [
    "MCConfig",
    "SimEstimate",
    "sample_nakagami_power",
    "zf_sic_detect",
    "estimate_ser",
    "estimate_outage",
    "estimate_rho",
]

_DET_TOL_LN = math.log(1e-24)  # relative Gram-determinant floor for rank checks


@dataclass(frozen=True)
class MCConfig:
    """Trial budget, seed and SNR grid for one simulation campaign."""

    trials: int
    seed: int
    snr_grid_db: tuple = ()
    batch_size: int = 65536

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must fit in 64 unsigned bits")
        object.__setattr__(self, "snr_grid_db", tuple(float(s) for s in self.snr_grid_db))


@dataclass(frozen=True)
class SimEstimate:
    """Proportion estimate with its binomial standard error.

    per_stage lists (stage index starting at 1, value, std_error) in
    detection order; resamples counts channel matrices regenerated due to
    numerical rank deficiency (essentially zero for continuous fading).
    """

    value: float
    std_error: float
    trials: int
    per_stage: tuple
    resamples: int = 0


def _proportion(count: int, trials: int) -> tuple:
    p = count / trials
    return p, math.sqrt(p * (1.0 - p) / trials)


def _rng_for(seed: int, point: int, batch: int) -> np.random.Generator:
    # 2^32 batches per grid point before key collision
    return np.random.Generator(np.random.Philox(key=[seed, (point << 32) + batch]))


def sample_nakagami_power(m_n: float, count: int, rng: np.random.Generator) -> np.ndarray:
    """Channel power gains |h|^2 for a Nakagami-m_N link with unit mean:
    Gamma(shape m_N, scale 1/m_N) variates.  The envelope is the square
    root and the phase is uniform on [0, 2 pi)."""
    if m_n < 0.5:
        raise ValueError(f"m_n must be >= 0.5, got {m_n}")
    return rng.gamma(m_n, 1.0 / m_n, size=count)


def _draw_channel(rng: np.random.Generator, batch: int, n: int, l: int, m_n: float):
    """i.i.d. channel matrix draw with deterministic rank-deficiency
    resampling (redraws come from the same stream, so results stay
    reproducible)."""
    def draw(count):
        g = rng.gamma(m_n, 1.0 / m_n, size=(count, n, l))
        ph = rng.uniform(0.0, 2.0 * np.pi, size=(count, n, l))
        return np.sqrt(g) * np.exp(1j * ph)

    H = draw(batch)
    resamples = 0
    while True:
        gram = np.conj(np.transpose(H, (0, 2, 1))) @ H
        _, logdet = np.linalg.slogdet(gram)
        log_norms = np.sum(np.log(np.sum(np.abs(H) ** 2, axis=1)), axis=1)
        bad = ~np.isfinite(logdet) | (logdet - log_norms < _DET_TOL_LN)
        n_bad = int(np.count_nonzero(bad))
        if n_bad == 0:
            return H, resamples
        H[bad] = draw(n_bad)
        resamples += n_bad


def _pinv_cols(cols: np.ndarray) -> np.ndarray:
    """Batched Moore-Penrose pseudo-inverse of (B, n, k) column blocks;
    closed forms for k <= 2 keep the hot l = 2 path off the SVD."""
    B, n, k = cols.shape
    ch = np.conj(np.transpose(cols, (0, 2, 1)))
    if k == 1:
        nrm = np.sum(np.abs(cols[:, :, 0]) ** 2, axis=1)
        return ch / nrm[:, None, None]
    if k == 2:
        gram = ch @ cols
        a = gram[:, 0, 0].real
        d = gram[:, 1, 1].real
        b = gram[:, 0, 1]
        det = a * d - (b * np.conj(b)).real
        inv = np.empty_like(gram)
        inv[:, 0, 0] = d / det
        inv[:, 1, 1] = a / det
        inv[:, 0, 1] = -b / det
        inv[:, 1, 0] = -np.conj(b) / det
        return inv @ ch
    return np.linalg.pinv(cols)


def _make_slicer(mod: ModulationScheme):
    """Nearest-point slicer plus the matching symbol drawer (unit average
    energy).  The simulator realizes coherent BPSK for the binary family
    and square M-QAM for the rectangular family."""
    if mod.kind == BINARY:
        if (mod.alpha, mod.beta) != (1.0, 0.5):
            raise ValueError("the simulator realizes BPSK only among binary schemes")

        def draw(rng, shape):
            return (rng.integers(0, 2, size=shape) * 2.0 - 1.0).astype(complex)

        def slice_(y):
            return np.where(y.real >= 0.0, 1.0, -1.0).astype(complex)

        return draw, slice_

    if mod.mary_order is None:
        raise ValueError("the simulator needs an explicit constellation order M")
    M = mod.mary_order
    side = int(round(math.sqrt(M)))
    scale = math.sqrt(1.5 / (M - 1.0))

    def draw(rng, shape):
        i = rng.integers(0, side, size=shape) * 2.0 - (side - 1.0)
        q = rng.integers(0, side, size=shape) * 2.0 - (side - 1.0)
        return (i + 1j * q) * scale

    def slice_(y):
        i = np.clip(np.round((y.real / scale + side - 1.0) / 2.0), 0, side - 1)
        q = np.clip(np.round((y.imag / scale + side - 1.0) / 2.0), 0, side - 1)
        return ((2.0 * i - (side - 1.0)) + 1j * (2.0 * q - (side - 1.0))) * scale

    return draw, slice_


def _sic_pass(H: np.ndarray, r: np.ndarray, noise_var: float, slicer, ordered: bool):
    """Run the full SIC chain on a batch.

    Returns (detected symbols by original stream index, detection order,
    per-stage post-ZF SNR).  Stage i detects the remaining stream with the
    highest post-processing SNR (ordered) or the lowest original index
    (unordered), slices, and subtracts the sliced symbol's contribution.
    """
    B, n, l = H.shape
    remaining = np.tile(np.arange(l), (B, 1))
    detected = np.zeros((B, l), dtype=complex)
    order = np.empty((B, l), dtype=np.int64)
    stage_snr = np.empty((B, l))
    resid = r.copy()
    rows = np.arange(B)
    for stage in range(l):
        cols = np.take_along_axis(H, remaining[:, None, :], axis=2)
        G = _pinv_cols(cols)
        row_norm2 = np.sum(np.abs(G) ** 2, axis=2)
        with np.errstate(divide="ignore"):
            snr = np.where(row_norm2 > 0.0, 1.0 / (noise_var * row_norm2), np.inf)
        sel = np.argmax(snr, axis=1) if ordered else np.zeros(B, dtype=np.int64)
        stream = remaining[rows, sel]
        g = G[rows, sel, :]
        y = np.einsum("bn,bn->b", g, resid)
        s_hat = slicer(y)
        order[:, stage] = stream
        stage_snr[:, stage] = snr[rows, sel]
        detected[rows, stream] = s_hat
        resid = resid - H[rows, :, stream] * s_hat[:, None]
        keep = np.ones_like(remaining, dtype=bool)
        keep[rows, sel] = False
        remaining = remaining[keep].reshape(B, -1)
    return detected, order, stage_snr


def zf_sic_detect(H, r, noise_var: float, mod: ModulationScheme, ordered: bool = True):
    """Detect one received vector with ordered (or fixed-order) ZF-SIC.

    H is the n x l channel matrix (n >= l, full column rank -- a
    numerically rank-deficient H raises), r the length-n received vector.
    Returns (detected symbols indexed by stream, detection order,
    per-stage post-ZF SNR).  noise_var = 0 is allowed: ordering then
    follows the pseudo-inverse row norms and the reported SNRs are inf.
    """
    H = np.asarray(H, dtype=complex)
    r = np.asarray(r, dtype=complex)
    if H.ndim != 2 or H.shape[0] < H.shape[1]:
        raise ValueError(f"H must be n x l with n >= l, got shape {H.shape}")
    gram = np.conj(H.T) @ H
    _, logdet = np.linalg.slogdet(gram)
    log_norms = float(np.sum(np.log(np.sum(np.abs(H) ** 2, axis=0))))
    if not np.isfinite(logdet) or logdet - log_norms < _DET_TOL_LN:
        raise ValueError("channel matrix is numerically rank deficient")
    _, slicer = _make_slicer(mod)
    det, order, snr = _sic_pass(H[None, :, :], r[None, :], noise_var, slicer, ordered)
    return det[0], order[0], snr[0]


def _batches(trials: int, batch_size: int):
    out = []
    done = 0
    while done < trials:
        size = min(batch_size, trials - done)
        out.append(size)
        done += size
    return out


def _map_batches(fn, tasks, workers: int):
    if workers <= 1:
        return [fn(*t) for t in tasks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda t: fn(*t), tasks))


def _grid_omegas(sys: SystemModel, mc: MCConfig):
    if mc.snr_grid_db:
        return [10.0 ** (db / 10.0) for db in mc.snr_grid_db]
    return [sys.omega]


def estimate_ser(sys: SystemModel, mod: ModulationScheme, mc: MCConfig,
                 ordered: bool = True, workers: int = 1) -> list:
    """Per-stage and total symbol-error estimates, one SimEstimate per SNR
    grid point (falling back to sys.omega when the grid is empty).

    value is the fraction of trials with at least one symbol error, which
    is the quantity the total-ASER decomposition stage1 + stage2 - cross
    describes; per_stage holds the error rate at each detection position.
    """
    draw_syms, slicer = _make_slicer(mod)
    l = sys.l

    def run_batch(point: int, batch: int, size: int, noise_var: float):
        rng = _rng_for(mc.seed, point, batch)
        H, resamples = _draw_channel(rng, size, sys.n, l, sys.m_n)
        s = draw_syms(rng, (size, l))
        w_re = rng.standard_normal((size, sys.n))
        w_im = rng.standard_normal((size, sys.n))
        r = np.einsum("bnl,bl->bn", H, s) + (w_re + 1j * w_im) * math.sqrt(noise_var / 2.0)
        detected, order, _ = _sic_pass(H, r, noise_var, slicer, ordered)
        errs = detected != s          # by stream index
        stage_errs = np.take_along_axis(errs, order, axis=1)  # by detection position
        counts = stage_errs.sum(axis=0).astype(int)
        union = int(np.count_nonzero(errs.any(axis=1)))
        return counts, union, resamples

    results = []
    for point, omega in enumerate(_grid_omegas(sys, mc)):
        noise_var = 1.0 / omega
        tasks = [(point, b, size, noise_var)
                 for b, size in enumerate(_batches(mc.trials, mc.batch_size))]
        parts = _map_batches(run_batch, tasks, workers)
        stage_counts = np.zeros(l, dtype=int)
        union = 0
        resamples = 0
        for counts, u, rs in parts:
            stage_counts += counts
            union += u
            resamples += rs
        per_stage = tuple(
            (i + 1, *_proportion(int(stage_counts[i]), mc.trials)) for i in range(l))
        value, se = _proportion(union, mc.trials)
        results.append(SimEstimate(value, se, mc.trials, per_stage, resamples))
    return results


def estimate_outage(sys: SystemModel, mc: MCConfig, x_th: float,
                    ordered: bool = True, workers: int = 1) -> list:
    """Empirical per-stage outage: fraction of trials whose post-ZF SNR at
    each detection position falls below the linear threshold x_th.
    value reports the first stage; per_stage carries every stage."""
    if not x_th > 0.0:
        raise ValueError(f"x_th must be > 0, got {x_th}")
    l = sys.l

    def run_batch(point: int, batch: int, size: int, noise_var: float):
        rng = _rng_for(mc.seed, point, batch)
        H, resamples = _draw_channel(rng, size, sys.n, l, sys.m_n)
        zeros = np.zeros((size, sys.n), dtype=complex)
        _, _, snr = _sic_pass(H, zeros, noise_var, lambda y: np.zeros_like(y), ordered)
        return (snr < x_th).sum(axis=0).astype(int), resamples

    results = []
    for point, omega in enumerate(_grid_omegas(sys, mc)):
        tasks = [(point, b, size, 1.0 / omega)
                 for b, size in enumerate(_batches(mc.trials, mc.batch_size))]
        parts = _map_batches(run_batch, tasks, workers)
        counts = np.zeros(l, dtype=int)
        resamples = 0
        for c, rs in parts:
            counts += c
            resamples += rs
        per_stage = tuple((i + 1, *_proportion(int(counts[i]), mc.trials)) for i in range(l))
        results.append(SimEstimate(per_stage[0][1], per_stage[0][2], mc.trials,
                                   per_stage, resamples))
    return results


def estimate_rho(sys: SystemModel, mc: MCConfig,
                 ordered: bool = True, workers: int = 1) -> float:
    """Sample Pearson correlation of the per-trial (stage-1, stage-2)
    post-ZF SNR pair at sys.omega; needs at least 10^4 trials for a
    stable estimate (and l = 2, since the pair is what correlates)."""
    if mc.trials < 10_000:
        raise ValueError("estimate_rho needs trials >= 10000")
    if sys.l != 2:
        raise ValueError("estimate_rho is defined for l = 2 transmit antennas")
    noise_var = 1.0 / sys.omega

    def run_batch(point: int, batch: int, size: int):
        rng = _rng_for(mc.seed, point, batch)
        H, _ = _draw_channel(rng, size, sys.n, 2, sys.m_n)
        zeros = np.zeros((size, sys.n), dtype=complex)
        _, _, snr = _sic_pass(H, zeros, noise_var, lambda y: np.zeros_like(y), ordered)
        x, y = snr[:, 0], snr[:, 1]
        return (float(x.sum()), float(y.sum()), float((x * x).sum()),
                float((y * y).sum()), float((x * y).sum()))

    tasks = [(0, b, size) for b, size in enumerate(_batches(mc.trials, mc.batch_size))]
    parts = _map_batches(run_batch, tasks, workers)
    sx = sy = sxx = syy = sxy = 0.0
    for px, py, pxx, pyy, pxy in parts:   # fixed order: bit-identical reduce
        sx += px
        sy += py
        sxx += pxx
        syy += pyy
        sxy += pxy
    nt = mc.trials
    cov = sxy / nt - (sx / nt) * (sy / nt)
    vx = sxx / nt - (sx / nt) ** 2
    vy = syy / nt - (sy / nt) ** 2
    return cov / math.sqrt(vx * vy)
