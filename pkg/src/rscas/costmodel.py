"""Closed-form estimates: search cost, construction I/O, leaf sizing.

The search cost of a trie whose levels branch on the dimension sequence
phi_1..phi_h, under a query class with per-step selectivities (one for path
steps, one for value steps), is

    1 + sum over l of product over i<=l of (fanout * selectivity(phi_i)),

the expected number of visited nodes when each level multiplies the surviving
node count by fanout times that step's selectivity. The reported tables show
the summation term; the constant 1 (the root) is added by search_cost.

Alternating the two dimensions minimizes, over all sequences using each
dimension equally often, the average cost across a query class and its
complement (selectivities swapped), which is what makes the interleaved
layout robust against asymmetric workloads. Its cost spread between the two
classes is minimal level by level: every level's contribution to the
difference is as small as any other balanced sequence's, and they all share
one sign. The end-to-end spread, however, is not always minimal, because a
sequence that clusters dimensions can produce per-level differences of mixed
sign that cancel in the sum; at o=10, h=12 the sequence VVVVPPPPVPPV has
summation costs 1902 and 1906 on the classes (0.1, 0.3) and (0.3, 0.1),
a spread of 4 against the alternating sequence's 728. The verify_*
functions sweep each claim over a selectivity grid, checking every balanced
dimension sequence, 924 of them at height 12: the average and levelwise
sweeps come back clean, while the aggregate-spread sweep reports the
cancellation points.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .core_keys import Dimension


def step_multiplier(dim: Dimension, fanout: float, sigma_p: float, sigma_v: float) -> float:
    return fanout * (sigma_p if dim is Dimension.PATH else sigma_v)


def summation_cost(fanout: float, dims: Sequence[Dimension],
                   sigma_p: float, sigma_v: float) -> float:
    """The level-sum term of the search cost (without the root's 1)."""
    total = 0.0
    product = 1.0
    for dim in dims:
        product *= step_multiplier(dim, fanout, sigma_p, sigma_v)
        total += product
    return total


def search_cost(fanout: float, dims: Sequence[Dimension],
                sigma_p: float, sigma_v: float) -> float:
    return 1.0 + summation_cost(fanout, dims, sigma_p, sigma_v)


def complementary(sigma_p: float, sigma_v: float) -> tuple[float, float]:
    """The mirrored query class: path and value selectivities swapped."""
    return sigma_v, sigma_p


def alternating_dims(height: int, start: Dimension = Dimension.VALUE) -> tuple[Dimension, ...]:
    dims = []
    dim = start
    for _ in range(height):
        dims.append(dim)
        dim = dim.alternate()
    return tuple(dims)


def standard_vectors(height: int) -> dict[str, tuple[Dimension, ...]]:
    """The dimension sequences the robustness table compares.

    The two mixed sequences are fixed height-12 examples of unbalanced
    interleavings; they only appear when the table is built at that height.
    """
    if height % 2:
        raise ValueError("height must be even so both dimensions appear equally often")
    half = height // 2
    vectors = {
        "alternating": alternating_dims(height),
        "paths-then-values": (Dimension.PATH,) * half + (Dimension.VALUE,) * half,
        "values-then-paths": (Dimension.VALUE,) * half + (Dimension.PATH,) * half,
    }
    if height == 12:
        P, V = Dimension.PATH, Dimension.VALUE
        vectors["mixed-a"] = (V, V, V, V, P, V, P, V, P, P, P, P)
        vectors["mixed-b"] = (V, V, V, P, P, V, P, V, V, P, P, P)
    return vectors


@dataclass(frozen=True)
class RobustnessRow:
    name: str
    dims: tuple[Dimension, ...]
    cost: float
    cost_complementary: float
    average: float
    spread: float  # sample standard deviation over the two costs


def robustness_report(fanout: float, height: int, sigma_p: float, sigma_v: float,
                      vectors: Optional[dict[str, tuple[Dimension, ...]]] = None
                      ) -> list[RobustnessRow]:
    """Summation costs of each dimension sequence on a query class and its mirror."""
    if vectors is None:
        vectors = standard_vectors(height)
    rows = []
    for name, dims in vectors.items():
        cost = summation_cost(fanout, dims, sigma_p, sigma_v)
        mirrored = summation_cost(fanout, dims, *complementary(sigma_p, sigma_v))
        avg = (cost + mirrored) / 2
        spread = math.sqrt((cost - avg) ** 2 + (mirrored - avg) ** 2)  # n-1 == 1
        rows.append(RobustnessRow(name, dims, cost, mirrored, avg, spread))
    return rows


def balanced_vectors(height: int) -> np.ndarray:
    """All dimension sequences using each dimension height/2 times.

    Returned as a boolean matrix, True where the step is a value step.
    """
    if height % 2:
        raise ValueError("height must be even")
    combos = list(itertools.combinations(range(height), height // 2))
    matrix = np.zeros((len(combos), height), dtype=bool)
    for row, positions in enumerate(combos):
        matrix[row, list(positions)] = True
    return matrix


def _vector_costs(matrix: np.ndarray, fanout: float,
                  sigma_p: float, sigma_v: float) -> np.ndarray:
    multipliers = np.where(matrix, fanout * sigma_v, fanout * sigma_p)
    return np.cumprod(multipliers, axis=1).sum(axis=1)


_DEFAULT_GRID = np.round(np.arange(0.05, 0.951, 0.05), 2)


def verify_average_optimality(fanout: float, height: int,
                              grid: Optional[Sequence[float]] = None,
                              epsilon: float = 1e-9) -> list[tuple[float, float]]:
    """Grid points where some balanced sequence beats alternating on average cost.

    The average is over a query class and its mirror. Returns the offending
    points; an empty list means the alternating sequence is optimal
    everywhere on the grid.
    """
    grid = _DEFAULT_GRID if grid is None else grid
    matrix = balanced_vectors(height)
    alternating = np.array([d is Dimension.VALUE for d in alternating_dims(height)])
    alt_row = int(np.nonzero((matrix == alternating).all(axis=1))[0][0])
    violations = []
    for sigma_p in grid:
        for sigma_v in grid:
            forward = _vector_costs(matrix, fanout, sigma_p, sigma_v)
            mirrored = _vector_costs(matrix, fanout, sigma_v, sigma_p)
            averages = (forward + mirrored) / 2
            if averages[alt_row] > averages.min() + epsilon:
                violations.append((float(sigma_p), float(sigma_v)))
    return violations


def verify_variability(fanout: float, height: int,
                       grid: Optional[Sequence[float]] = None,
                       epsilon: float = 1e-9) -> list[tuple[float, float]]:
    """Grid points where some balanced sequence has a smaller cost spread.

    The aggregate spread is not minimized by the alternating sequence off
    the grid diagonal (see the module docstring), so this sweep reports
    where the cancellation happens rather than coming back empty.
    """
    grid = _DEFAULT_GRID if grid is None else grid
    matrix = balanced_vectors(height)
    alternating = np.array([d is Dimension.VALUE for d in alternating_dims(height)])
    alt_row = int(np.nonzero((matrix == alternating).all(axis=1))[0][0])
    violations = []
    for sigma_p in grid:
        for sigma_v in grid:
            forward = _vector_costs(matrix, fanout, sigma_p, sigma_v)
            mirrored = _vector_costs(matrix, fanout, sigma_v, sigma_p)
            spreads = np.abs(forward - mirrored)
            if spreads[alt_row] > spreads.min() + epsilon:
                violations.append((float(sigma_p), float(sigma_v)))
    return violations


def _levelwise_diffs(matrix: np.ndarray, fanout: float,
                     sigma_p: float, sigma_v: float) -> np.ndarray:
    """Per-level |cost difference| between a query class and its mirror.

    Products are computed from the per-level dimension counts so that two
    sequences balanced through a level get bit-identical values and the
    difference is exactly zero.
    """
    height = matrix.shape[1]
    v_counts = np.cumsum(matrix, axis=1)
    p_counts = np.arange(1, height + 1)[None, :] - v_counts
    forward = (np.power(fanout * sigma_v, v_counts)
               * np.power(fanout * sigma_p, p_counts))
    mirrored = (np.power(fanout * sigma_p, v_counts)
                * np.power(fanout * sigma_v, p_counts))
    return np.abs(forward - mirrored)


def verify_levelwise_variability(fanout: float, height: int,
                                 grid: Optional[Sequence[float]] = None,
                                 epsilon: float = 1e-9) -> list[tuple[float, float]]:
    """Grid points where some balanced sequence beats alternating at a level.

    Checks, level by level, that the alternating sequence's contribution to
    the spread between a query class and its mirror is no larger than any
    other balanced sequence's. This levelwise form holds everywhere; an
    empty result means no grid point found a smaller per-level difference.
    """
    grid = _DEFAULT_GRID if grid is None else grid
    matrix = balanced_vectors(height)
    alternating = np.array([d is Dimension.VALUE for d in alternating_dims(height)])
    alt_row = int(np.nonzero((matrix == alternating).all(axis=1))[0][0])
    violations = []
    for sigma_p in grid:
        for sigma_v in grid:
            diffs = _levelwise_diffs(matrix, fanout, sigma_p, sigma_v)
            if (diffs[alt_row][None, :] > diffs + epsilon).any():
                violations.append((float(sigma_p), float(sigma_v)))
    return violations


# -- construction I/O -------------------------------------------------------


def _ceil_log(base: int, value: int) -> int:
    """Smallest L with base**L >= value, by exact integer arithmetic."""
    if value <= 1:
        return 0
    level, power = 0, 1
    while power < value:
        power *= base
        level += 1
    return level


def bulk_io_uniform(n_keys: int, memory_keys: int, page_keys: int, fanout: int) -> int:
    """Partitioning page I/O for a uniformly splitting build.

    Each level of splits below the memory budget streams all keys out and
    back once: two transfers of ceil(N/B) pages, for ceil(log_f ceil(N/M))
    levels.
    """
    if fanout < 2:
        raise ValueError("fanout must be at least 2")
    levels = _ceil_log(fanout, math.ceil(n_keys / memory_keys))
    return 2 * levels * math.ceil(n_keys / page_keys)


def bulk_io_skewed(n_keys: int, memory_keys: int, page_keys: int) -> int:
    """Partitioning page I/O in the worst case of maximally skewed splits.

    Each split peels one key off; the shrinking remainder is rewritten until
    it fits the memory budget rounded to whole pages.
    """
    peeled = n_keys - math.ceil(memory_keys / page_keys) * page_keys
    if peeled <= 0:
        return 0
    return 2 * sum(math.ceil((n_keys - i) / page_keys) + 1 for i in range(1, peeled + 1))


def amortized_insert_io(n_keys: int, memory_keys: int, page_keys: int,
                        cost_fn: Callable[[int, int, int], int]) -> float:
    """Per-insert page I/O over a full overflow cascade up to n_keys.

    Every key takes part in log2(N/M) merges, each merge paying the given
    bulk construction cost; dividing by N amortizes.
    """
    if n_keys <= memory_keys:
        return 0.0
    return (math.log2(n_keys / memory_keys) / n_keys
            * cost_fn(n_keys, memory_keys, page_keys))


# -- leaf and depth estimates ----------------------------------------------


def expected_depth(avg_fanout: float, n_keys: int | float, tau: int) -> float:
    """Expected trie depth: the leaf count, log base average fanout."""
    if avg_fanout <= 1 or n_keys <= 0:
        return 0.0
    leaves = math.ceil(n_keys / tau)
    if leaves <= 1:
        return 0.0
    return math.log(leaves) / math.log(avg_fanout)


@dataclass(frozen=True)
class TauEstimates:
    """How the leaf capacity tau trades metadata against wasted work."""

    metadata_bytes_per_page: float
    expected_distinct_prefixes: float
    duplicate_overhead: float
    visited_nodes: float
    step_selectivity: float
    irrelevant_keys: float


def tau_estimators(tau: int, n_prefixes: int, page_keys: int, entry_bytes: int,
                   sigma_cumulative: float, steps: int, levels: int,
                   branching: int) -> TauEstimates:
    """Leaf-capacity estimates.

    metadata_bytes_per_page: per-page index metadata when every tau keys
    share one entry of entry_bytes. expected_distinct_prefixes: distinct
    prefixes among tau keys drawn uniformly from n_prefixes, so
    duplicate_overhead counts the redundant stored prefixes per leaf.
    visited_nodes: root path length shortened by the log of the leaf
    capacity. step_selectivity: the per-step share when a cumulative
    selectivity spreads over the given number of steps; irrelevant_keys is
    the non-matching balance of a leaf under that share.
    """
    if tau < 1:
        raise ValueError("tau must be at least 1")
    metadata = page_keys * entry_bytes / tau
    n = n_prefixes
    distinct = n * (1.0 - ((n - 1) / n) ** tau)
    sigma_step = sigma_cumulative ** (1.0 / steps)
    return TauEstimates(
        metadata_bytes_per_page=metadata,
        expected_distinct_prefixes=distinct,
        duplicate_overhead=tau - distinct,
        visited_nodes=levels - math.log(tau, branching),
        step_selectivity=sigma_step,
        irrelevant_keys=(1.0 - sigma_step) * (tau - 1),
    )
