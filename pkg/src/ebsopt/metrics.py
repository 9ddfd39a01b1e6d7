"""Relevance and accuracy metrics.

Similarity uses Jaro with the Winkler common-prefix boost (prefix capped at
4, scale 0.1). Accuracy metrics compare the scoped pipeline against the
unscoped baseline on the shared cost objective (signed degradation) and on
the query objective (sense-normalized so positive always means the scoped
solution serves the query better).
"""

from __future__ import annotations

from dataclasses import dataclass

from .dsl import CanonicalForm


@dataclass
class MetricReport:
    locality: float
    global_suboptimality: float | None
    local_satisfaction_gain: float | None
    cpu_time_scoped: float
    cpu_time_full: float
    text_similarity: float | None = None
    result_similarity: float | None = None
    scoped_status: str = ""
    full_status: str = ""
    scoped_gap: float = 0.0
    full_gap: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.locality <= 1.0:
            raise ValueError(f"locality must lie in (0, 1], got {self.locality}")


def locality(query_spots: int, total_spots: int) -> float:
    """Fraction of the roster the query mentions (or protects)."""
    if total_spots <= 0:
        raise ValueError("total_spots must be positive")
    if not 0 < query_spots <= total_spots:
        raise ValueError(
            f"a query must mention between 1 and {total_spots} spots, got {query_spots}")
    return query_spots / total_spots


def global_suboptimality(full_obj_scoped: float, full_obj_full: float) -> float:
    """Signed relative degradation of the cost objective; positive means
    the scoped solution costs more than the unscoped optimum."""
    if full_obj_full == 0:
        raise ValueError("baseline cost objective is zero; ratio undefined")
    return (full_obj_scoped - full_obj_full) / full_obj_full


def local_satisfaction_gain(qr_scoped: float, qr_full: float, sense: str) -> float:
    """Sense-normalized relative query-objective advantage of the scoped
    solution; positive always means the scoped run serves the query better."""
    if qr_full == 0:
        raise ValueError("baseline query objective is zero; ratio undefined")
    if sense == "maximize":
        return (qr_scoped - qr_full) / abs(qr_full)
    if sense == "minimize":
        return (qr_full - qr_scoped) / abs(qr_full)
    raise ValueError(f"unknown sense {sense!r}")


def jaro(a: str, b: str) -> float:
    if a == b:
        return 1.0
    la, lb = len(a), len(b)
    if la == 0 or lb == 0:
        return 0.0
    window = max(la, lb) // 2 - 1
    a_hit = [False] * la
    b_hit = [False] * lb
    matches = 0
    for i in range(la):
        lo = max(0, i - window)
        hi = min(i + window + 1, lb)
        for j in range(lo, hi):
            if b_hit[j] or a[i] != b[j]:
                continue
            a_hit[i] = b_hit[j] = True
            matches += 1
            break
    if matches == 0:
        return 0.0
    transpositions = 0
    j = 0
    for i in range(la):
        if not a_hit[i]:
            continue
        while not b_hit[j]:
            j += 1
        if a[i] != b[j]:
            transpositions += 1
        j += 1
    transpositions //= 2
    return (matches / la + matches / lb + (matches - transpositions) / matches) / 3.0


def jaro_winkler(a: str, b: str, prefix_scale: float = 0.1, max_prefix: int = 4) -> float:
    base = jaro(a, b)
    prefix = 0
    for ca, cb in zip(a, b):
        if ca != cb or prefix == max_prefix:
            break
        prefix += 1
    boosted = base + prefix * prefix_scale * (1.0 - base)
    return min(1.0, boosted)


def text_similarity(dsl_a: str, dsl_b: str) -> float:
    """Surface similarity of the raw objective texts."""
    return jaro_winkler(dsl_a, dsl_b)


def result_similarity(form_a: CanonicalForm, form_b: CanonicalForm) -> float:
    """Similarity of the mathematical content: canonical-key strings under
    Jaro-Winkler, so equal polynomials score exactly 1."""
    return jaro_winkler(form_a.key(), form_b.key())
