"""Finite-blocklength analysis of the XOR bit-flipping model.

With n = a*T channels and receiver-known uniform selections k_t, an output
reveals the flip bit of its channel, so

    H(y^t | x^t) = E|{k_1..k_t}| = n (1 - (1 - 1/n)^t)      (coupon count)
    I(x_{t+1}; y_{t+1} | x^t, y^t) = 1 - (1 - 1/n)^t         (channel already seen)

The closed forms are checked against :func:`enumerate_mi` and
:func:`enumerate_entropy`, which build the joint law of selections, flip
bits and inputs from scratch and sum it out exactly.
"""

from __future__ import annotations

import functools
import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Union

import numpy as np

from .errors import BudgetExceededError, DomainError

DEFAULT_BUDGET = 10**8
Number = Union[float, Fraction]

# Above this block length the integer optimum is found in floating point.
EXACT_SCAN_LIMIT = 64


def channel_count(a: Number, T: int, *, round_channels: bool = False) -> int:
    """a*T as an integer; non-integral products are rejected unless rounding is asked for."""
    if not a > 0:
        raise DomainError(f"a={a!r} must be positive")
    if T < 1:
        raise DomainError(f"T={T!r} must be a positive integer")
    product = a * T
    n = round(product)
    if not round_channels and abs(product - n) > 1e-9:
        raise DomainError(f"a*T = {float(product)!r} is not an integer")
    if n < 1:
        raise DomainError(f"a*T = {float(product)!r} gives no channels")
    return int(n)


def coupon_expected_unique(n_channels: int, t: int, *, exact: bool = False) -> Number:
    """Expected number of distinct values among t uniform draws from n_channels."""
    if n_channels < 1 or t < 0:
        raise DomainError("need n_channels >= 1 and t >= 0")
    return n_channels * _seen_probability(n_channels, t, exact)


def _seen_probability(n: int, t: int, exact: bool) -> Number:
    if exact:
        return 1 - Fraction(n - 1, n) ** t
    if n == 1:
        return 1.0 if t else 0.0
    return -math.expm1(t * math.log1p(-1.0 / n))


def xor_finite_mi(a: Number, T: int, T_tau: int, *, exact: bool = False, round_channels: bool = False) -> Number:
    """I(x_{T_tau+1}; y_{T_tau+1} | x^{T_tau}, y^{T_tau}) in bits."""
    n = channel_count(a, T, round_channels=round_channels)
    if not (0 <= T_tau < T):
        raise DomainError(f"T_tau={T_tau!r} must lie in [0, T)")
    return _seen_probability(n, T_tau, exact)


@dataclass(frozen=True)
class FiniteBlockResult:
    """Integer-training-length optimum of ((T - T_tau)/T) * I(T_tau).

    ``mi_curve[j]`` is the conditional mutual information after j training
    symbols.  ``tie`` marks that another T_tau reached the same rate (exactly
    for T <= EXACT_SCAN_LIMIT, to 1e-12 relative otherwise).
    """

    T: int
    n_channels: int
    T_tau_opt: int
    tau_opt: float
    rate: float
    mi_curve: tuple[float, ...]
    tie: bool = False
    exact_rate: Optional[Fraction] = None


def xor_finite_tau_opt(a: Number, T: int, *, round_channels: bool = False) -> FiniteBlockResult:
    """Exhaustive scan of T_tau in {0, ..., T-1}; ties go to the smaller T_tau."""
    if T < 2:
        raise DomainError("T must be >= 2")
    n = channel_count(a, T, round_channels=round_channels)

    if T <= EXACT_SCAN_LIMIT:
        mi = [_seen_probability(n, j, True) for j in range(T)]
        rates = [Fraction(T - j, T) * m for j, m in enumerate(mi)]
        best_rate = max(rates)
        winners = [j for j, r in enumerate(rates) if r == best_rate]
        best = winners[0]
        return FiniteBlockResult(
            T=T,
            n_channels=n,
            T_tau_opt=best,
            tau_opt=best / T,
            rate=float(best_rate),
            mi_curve=tuple(float(m) for m in mi),
            tie=len(winners) > 1,
            exact_rate=best_rate,
        )

    j = np.arange(T, dtype=float)
    mi = -np.expm1(j * math.log1p(-1.0 / n)) if n > 1 else np.where(j > 0, 1.0, 0.0)
    rates = (T - j) / T * mi
    best = int(np.argmax(rates))
    near = np.flatnonzero(rates >= rates[best] * (1.0 - 1e-12))
    return FiniteBlockResult(
        T=T,
        n_channels=n,
        T_tau_opt=best,
        tau_opt=best / T,
        rate=float(rates[best]),
        mi_curve=tuple(mi.tolist()),
        tie=len(near) > 1,
    )


@dataclass(frozen=True)
class EnumerationInstance:
    n_channels: int
    t: int
    exhaustive: bool = True
    budget: int = DEFAULT_BUDGET

    def __post_init__(self):
        if self.n_channels < 1:
            raise DomainError("n_channels must be >= 1")
        if self.t < 0:
            raise DomainError("t must be >= 0")
        if self.exhaustive and enumeration_states(self.n_channels, self.t) > self.budget:
            raise BudgetExceededError(
                f"{enumeration_states(self.n_channels, self.t)} states exceed the budget {self.budget}"
            )


def enumeration_states(n_channels: int, t: int) -> int:
    """Selection-and-input states walked by an exhaustive MI computation after t training symbols."""
    return n_channels ** (t + 1) * 2 ** (t + 1)


def _canonical(selection: tuple[int, ...]) -> tuple[int, ...]:
    """Relabel channels in order of first appearance; flip bits are iid so this loses nothing."""
    labels: dict[int, int] = {}
    return tuple(labels.setdefault(k, len(labels)) for k in selection)


def _bits(count: int, width: int) -> np.ndarray:
    return ((np.arange(count)[:, None] >> np.arange(width)) & 1).astype(np.int64)


def _log2_ratio_sum(weights, num, den) -> Number:
    """sum(weights * log2(num/den)), exact when every ratio is a power of two."""
    g = np.gcd(num, den)
    p, q = num // g, den // g
    if np.all((p & (p - 1)) == 0) and np.all((q & (q - 1)) == 0):
        logs = np.rint(np.log2(p)).astype(np.int64) - np.rint(np.log2(q)).astype(np.int64)
        return int(np.sum(weights * logs))
    return float(np.sum(weights * np.log2(num / den)))


def _joint_outcomes(n: int, selection: tuple[int, ...]):
    """All equally likely (flip vector, input sequence) pairs for one selection sequence.

    Returns input and output bit arrays of shape (2^n * 2^L, L).
    """
    length = len(selection)
    flips = _bits(2**n, n)
    inputs = _bits(2**length, length)
    x = np.broadcast_to(inputs[None, :, :], (2**n, 2**length, length))
    y = x ^ flips[:, None, list(selection)]
    return x.reshape(-1, length), y.reshape(-1, length)


def _pack(bits: np.ndarray) -> np.ndarray:
    if bits.shape[1] == 0:
        return np.zeros(bits.shape[0], dtype=np.int64)
    return bits @ (1 << np.arange(bits.shape[1], dtype=np.int64))


def _group_counts(keys: np.ndarray) -> np.ndarray:
    """For every row, how many rows share its key."""
    _, inverse, counts = np.unique(keys, return_inverse=True, return_counts=True)
    return counts[inverse]


@functools.lru_cache(maxsize=None)
def _pattern_mi(n: int, pattern: tuple[int, ...]):
    """N * I(x_L; y_L | x^{L-1}, y^{L-1}) for one selection sequence, and N."""
    x, y = _joint_outcomes(n, pattern)
    past = x.shape[1] - 1
    z = _pack(x[:, :past]) | (_pack(y[:, :past]) << past)
    xn, yn = x[:, past], y[:, past]
    c_xyz = _group_counts(z * 4 + xn * 2 + yn)
    c_z = _group_counts(z)
    c_xz = _group_counts(z * 2 + xn)
    c_yz = _group_counts(z * 2 + yn)
    # Each row is one outcome, so summing log2 over rows weights by the joint law.
    total = _log2_ratio_sum(np.ones_like(c_xyz), c_xyz * c_z, c_xz * c_yz)
    return total, x.shape[0]


@functools.lru_cache(maxsize=None)
def _pattern_entropy(n: int, pattern: tuple[int, ...], known: int):
    """N * H(y^L | x^known) for one selection sequence, and N."""
    x, y = _joint_outcomes(n, pattern)
    length = x.shape[1]
    xs = _pack(x[:, :known])
    c_x = _group_counts(xs)
    c_xy = _group_counts(xs | (_pack(y) << known))
    return _log2_ratio_sum(np.ones_like(c_x), c_x, c_xy), x.shape[0]


def _average_over_selections(n: int, length: int, per_pattern) -> Number:
    patterns: dict[tuple[int, ...], int] = {}
    for selection in itertools.product(range(n), repeat=length):
        key = _canonical(selection)
        patterns[key] = patterns.get(key, 0) + 1
    total: Number = Fraction(0)
    for pattern, count in patterns.items():
        value, outcomes = per_pattern(n, pattern)
        if isinstance(value, int) and isinstance(total, Fraction):
            total += Fraction(count * value, outcomes)
        else:
            total = float(total) + count * value / outcomes
    return total / n**length


def _check_budget(inst: EnumerationInstance, T_tau: int) -> None:
    states = enumeration_states(inst.n_channels, T_tau)
    if states > inst.budget:
        raise BudgetExceededError(f"{states} states exceed the budget {inst.budget}")


def enumerate_mi(inst: EnumerationInstance, T_tau: Optional[int] = None) -> Number:
    """Exact I(x_{T_tau+1}; y_{T_tau+1} | x^{T_tau}, y^{T_tau}, k) by brute force.

    Walks every selection sequence k of length T_tau + 1, every flip vector
    of all n channels and every input sequence, and sums the conditional
    mutual information of the last symbol.  Returns a Fraction when all
    log-ratios are powers of two (always the case for this model).
    """
    T_tau = inst.t if T_tau is None else T_tau
    if T_tau < 0:
        raise DomainError("T_tau must be >= 0")
    _check_budget(inst, T_tau)
    return _average_over_selections(inst.n_channels, T_tau + 1, _pattern_mi)


def enumerate_entropy(inst: EnumerationInstance, T_tau: Optional[int] = None, outputs: Optional[int] = None) -> Number:
    """Exact H(y^outputs | x^{T_tau}, k) by brute force, in bits.

    ``outputs`` defaults to ``T_tau``.  Inputs beyond the last output are
    independent of everything observed and drop out of the conditioning.
    """
    T_tau = inst.t if T_tau is None else T_tau
    outputs = T_tau if outputs is None else outputs
    if T_tau < 0 or outputs < 0:
        raise DomainError("T_tau and outputs must be >= 0")
    if outputs == 0:
        return Fraction(0)
    _check_budget(inst, outputs - 1)
    known = min(T_tau, outputs)
    return _average_over_selections(inst.n_channels, outputs, lambda n, pattern: _pattern_entropy(n, pattern, known))


def enumerate_mi_sequence(inst: EnumerationInstance, T_tau: int, horizon: int) -> list[Number]:
    """I(x_t; y_t | x^{t-1}, y^{t-1}) for t = T_tau+1, ..., horizon."""
    return [enumerate_mi(inst, t - 1) for t in range(T_tau + 1, horizon + 1)]


@dataclass(frozen=True)
class MonteCarloEstimate:
    estimate: float
    std_err: float
    samples: int


def _distinct_counts(rng: np.random.Generator, n: int, t: int, size: int) -> np.ndarray:
    draws = np.sort(rng.integers(0, n, size=(size, t)), axis=1)
    return 1 + np.count_nonzero(np.diff(draws, axis=1), axis=1)


def mc_entropy(
    inst: EnumerationInstance,
    T_tau: Optional[int] = None,
    samples: int = 100_000,
    seed: int = 0,
    *,
    blocks: int = 100,
    workers: int = 1,
) -> MonteCarloEstimate:
    """Monte Carlo H(y^{T_tau} | x^{T_tau}) with a delete-one-block jackknife error.

    Each sampled selection sequence contributes its exact inner entropy, one
    bit per distinct channel.  Block b draws from the b-th child of
    ``SeedSequence(seed)``, so the result does not depend on ``workers``.
    """
    T_tau = inst.t if T_tau is None else T_tau
    if samples < 10_000:
        raise DomainError("samples must be >= 10^4")
    if T_tau < 0:
        raise DomainError("T_tau must be >= 0")
    if T_tau == 0:
        return MonteCarloEstimate(estimate=0.0, std_err=0.0, samples=samples)

    sizes = [len(part) for part in np.array_split(np.arange(samples), blocks)]
    children = np.random.SeedSequence(seed).spawn(blocks)

    def block_sum(i: int) -> float:
        rng = np.random.default_rng(children[i])
        return float(_distinct_counts(rng, inst.n_channels, T_tau, sizes[i]).sum())

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            sums = np.array(list(pool.map(block_sum, range(blocks))))
    else:
        sums = np.array([block_sum(i) for i in range(blocks)])
    sizes_arr = np.array(sizes, dtype=float)
    estimate = sums.sum() / samples
    leave_one_out = (sums.sum() - sums) / (samples - sizes_arr)
    std_err = math.sqrt((blocks - 1) / blocks * np.sum((leave_one_out - leave_one_out.mean()) ** 2))
    return MonteCarloEstimate(estimate=float(estimate), std_err=std_err, samples=samples)
