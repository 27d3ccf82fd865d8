"""Ranking evaluation: top-n tables, percentile positions, strata curves.

A test case is solved by scoring its candidates, sorting descending, and
finding the position of the held-out positive.  Two measures are
reported: the fraction of cases ranked within the first n positions
(identical to Recall@n here, since each case has exactly one relevant
photo), and the length-robust percentile 100*(index-1)/size.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .baselines import centroid_scores, random_scores
from .model import ElvisModel, predict_scores


@dataclass(frozen=True)
class Ranking:
    ordered_photo_ids: tuple[str, ...]
    index_of_positive: int

    @property
    def size(self) -> int:
        return len(self.ordered_photo_ids)


@dataclass(frozen=True)
class EvalFilters:
    min_candidates: int = 10
    min_user_train_photos: int = 10


@dataclass(frozen=True)
class CaseResult:
    user_id: str
    item_id: str
    size: int
    index: int
    percentile: float
    user_train_photo_count: int


@dataclass
class EvalReport:
    method: str
    repetitions: int
    filters: EvalFilters
    case_count: int
    top_n: list       # top_n[n-1] = percentage of cases with index <= n
    median_percentile: float
    mean_percentile: float
    strata: list      # rows (x, median, mean, count); medians None when count = 0
    case_results: list = field(default_factory=list)


def rank_candidates(scores, positive_id: str) -> Ranking:
    """Sort score map descending; ties break on ascending photo id."""
    if not scores:
        raise ValueError("empty score map")
    if positive_id not in scores:
        raise ValueError(f"positive photo {positive_id!r} missing from scores")
    for pid, s in scores.items():
        if math.isnan(s):
            raise ValueError(f"NaN score for photo {pid!r}")
    ordered = tuple(sorted(scores, key=lambda pid: (-scores[pid], pid)))
    return Ranking(ordered_photo_ids=ordered,
                   index_of_positive=ordered.index(positive_id) + 1)


def percentile(index: int, size: int) -> float:
    """Percentile position of the correct photo: 100*(index-1)/size.

    Zero means first place; lower is better.
    """
    if size < 1:
        raise ValueError("size must be >= 1")
    if not 1 <= index <= size:
        raise ValueError(f"index {index} out of range [1, {size}]")
    return 100.0 * (index - 1) / size


def _case_size(case) -> int:
    return case.size if hasattr(case, "size") else len(case.candidate_photo_ids)


def apply_filters(cases, min_candidates: int = 10,
                  min_user_train_photos: int = 10) -> list:
    """Keep cases with enough candidates and enough user training photos.

    Small candidate sets make top-n optimistically biased (a ranking
    shorter than n always hits), hence the default threshold of 10 on
    both sides.  Works on test cases and on ranked case results alike.
    """
    return [
        c for c in cases
        if _case_size(c) >= min_candidates
        and c.user_train_photo_count >= min_user_train_photos
    ]


def top_n_table(results: Sequence[CaseResult], n_max: int = 10) -> list:
    """Percentage of cases with index <= n, for n = 1..n_max."""
    if not results:
        raise ValueError("no cases")
    total = len(results)
    return [
        100.0 * sum(1 for r in results if r.index <= n) / total
        for n in range(1, n_max + 1)
    ]


def recall_at_n(results: Sequence[CaseResult], n: int) -> float:
    """Recall@n as a percentage; each case has exactly one relevant photo."""
    if not results:
        raise ValueError("no cases")
    hits = sum(1 for r in results if r.index <= n)
    return 100.0 * hits / len(results)


def precision_at_n(results: Sequence[CaseResult], n: int) -> float:
    """Mean Precision@n over cases (n * this, as a percentage, = Recall@n)."""
    if not results:
        raise ValueError("no cases")
    hits = sum(1 for r in results if r.index <= n)
    return hits / (n * len(results))


def stratified_percentiles(results: Sequence[CaseResult], x_max: int = 100) -> list:
    """Percentile statistics over cases from users with >= x training photos.

    Returns rows (x, median, mean, count) for x = 1..x_max; empty strata
    produce (x, None, None, 0).
    """
    rows = []
    for x in range(1, x_max + 1):
        vals = [r.percentile for r in results if r.user_train_photo_count >= x]
        if vals:
            rows.append((x, float(np.median(vals)), float(np.mean(vals)), len(vals)))
        else:
            rows.append((x, None, None, 0))
    return rows


# --- scorers -----------------------------------------------------------
#
# A scorer maps (user_id, candidate list, seed) to one score per
# candidate.  Deterministic scorers ignore the seed.


def elvis_scorer(model: ElvisModel, store) -> Callable:
    def score(user_id, candidates, seed):
        pairs = [(model.user_index(user_id), pid) for pid in candidates]
        return predict_scores(model, pairs, store)

    return score


def random_scorer() -> Callable:
    def score(user_id, candidates, seed):
        return random_scores(candidates, seed)

    return score


def centroid_scorer(store) -> Callable:
    def score(user_id, candidates, seed):
        return centroid_scores(candidates, store)

    return score


def solve_case(scorer: Callable, case, seed) -> CaseResult:
    scores = scorer(case.user_id, case.candidate_photo_ids, seed)
    ranking = rank_candidates(
        dict(zip(case.candidate_photo_ids, scores)), case.positive_photo_id
    )
    return CaseResult(
        user_id=case.user_id,
        item_id=case.item_id,
        size=ranking.size,
        index=ranking.index_of_positive,
        percentile=percentile(ranking.index_of_positive, ranking.size),
        user_train_photo_count=case.user_train_photo_count,
    )


def evaluate_method(scorer: Callable, cases, filters: EvalFilters = EvalFilters(),
                    repetitions: int = 1, base_seed: int = 0, method: str = "elvis",
                    n_max: int = 10, strata_max: int = 100, workers: int = 1) -> EvalReport:
    """Rank every filtered case and aggregate the metrics.

    For stochastic scorers the aggregate metrics are averaged over
    `repetitions` independently seeded runs; every case gets its own
    derived seed within each run.  Per-case rows come from the first run.
    """
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    kept = apply_filters(cases, filters.min_candidates, filters.min_user_train_photos)
    if not kept:
        raise ValueError("no cases left after filtering")

    def run(rep):
        seeds = [[base_seed, rep, i] for i in range(len(kept))]
        if workers > 1:
            from concurrent.futures import ThreadPoolExecutor

            with ThreadPoolExecutor(max_workers=workers) as pool:
                return list(pool.map(lambda args: solve_case(scorer, *args),
                                     zip(kept, seeds)))
        return [solve_case(scorer, case, seed) for case, seed in zip(kept, seeds)]

    top_n_acc = np.zeros(n_max)
    median_acc = 0.0
    mean_acc = 0.0
    strata_median = np.zeros(strata_max)
    strata_mean = np.zeros(strata_max)
    strata_count = None
    strata_filled = np.zeros(strata_max, dtype=bool)
    first_results = None
    for rep in range(repetitions):
        results = run(rep)
        if first_results is None:
            first_results = results
        top_n_acc += np.array(top_n_table(results, n_max))
        pct = [r.percentile for r in results]
        median_acc += float(np.median(pct))
        mean_acc += float(np.mean(pct))
        rows = stratified_percentiles(results, strata_max)
        if strata_count is None:
            strata_count = [row[3] for row in rows]
        for i, (_, med, mean, count) in enumerate(rows):
            if count > 0:
                strata_median[i] += med
                strata_mean[i] += mean
                strata_filled[i] = True

    strata = []
    for i in range(strata_max):
        if strata_filled[i]:
            strata.append((i + 1, strata_median[i] / repetitions,
                           strata_mean[i] / repetitions, strata_count[i]))
        else:
            strata.append((i + 1, None, None, 0))

    return EvalReport(
        method=method,
        repetitions=repetitions,
        filters=filters,
        case_count=len(kept),
        top_n=list(top_n_acc / repetitions),
        median_percentile=median_acc / repetitions,
        mean_percentile=mean_acc / repetitions,
        strata=strata,
        case_results=first_results,
    )


def write_report(report: EvalReport, out_dir) -> list:
    """Write topn.csv, cases.csv, strata.csv and summary.csv; returns paths."""
    os.makedirs(out_dir, exist_ok=True)
    written = []

    path = os.path.join(out_dir, "topn.csv")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("n,percentage\n")
        for n, value in enumerate(report.top_n, start=1):
            fh.write(f"{n},{value!r}\n")
    written.append(path)

    path = os.path.join(out_dir, "cases.csv")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("user,item,size,index,percentile\n")
        for r in report.case_results:
            fh.write(f"{r.user_id},{r.item_id},{r.size},{r.index},{r.percentile!r}\n")
    written.append(path)

    path = os.path.join(out_dir, "strata.csv")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("x,median,mean,count\n")
        for x, med, mean, count in report.strata:
            med_s = "" if med is None else repr(med)
            mean_s = "" if mean is None else repr(mean)
            fh.write(f"{x},{med_s},{mean_s},{count}\n")
    written.append(path)

    path = os.path.join(out_dir, "summary.csv")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("metric,value\n")
        fh.write(f"method,{report.method}\n")
        fh.write(f"repetitions,{report.repetitions}\n")
        fh.write(f"cases,{report.case_count}\n")
        fh.write(f"min_candidates,{report.filters.min_candidates}\n")
        fh.write(f"min_user_train_photos,{report.filters.min_user_train_photos}\n")
        fh.write(f"median_percentile,{report.median_percentile!r}\n")
        fh.write(f"mean_percentile,{report.mean_percentile!r}\n")
    written.append(path)
    return written
