"""Metric-vs-human agreement over pairwise judgments and Gwet's AC1.

Conventions (flagged in CLI output): metric ties count as non-agreement
under the strict higher-score reading, and human majority ties are
excluded from the denominator but reported.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

from .errors import DataError, UndefinedAggregateError

CRITERIA = ("informativeness", "accuracy", "fewer_hallucinations", "overall")


@dataclass(frozen=True)
class PairJudgment:
    """Per-annotator A/B choices for one head-to-head caption comparison."""

    comparison_id: str
    criterion: str
    votes: tuple[str, ...]
    sample_id: str = ""

    def __post_init__(self) -> None:
        if self.criterion not in CRITERIA:
            raise DataError(f"unknown criterion {self.criterion!r}")
        if not self.votes:
            raise DataError(f"comparison {self.comparison_id!r} has no votes")
        bad = set(self.votes) - {"A", "B"}
        if bad:
            raise DataError(f"comparison {self.comparison_id!r} has invalid votes {sorted(bad)}")


def load_judgments(path: str | Path) -> list[PairJudgment]:
    """Load line-JSON {comparison_id, criterion, votes, sample_id} records."""
    judgments = []
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: line {line_no}: malformed JSON: {exc.msg}") from exc
        judgments.append(
            PairJudgment(
                comparison_id=record["comparison_id"],
                criterion=record["criterion"],
                votes=tuple(record["votes"]),
                sample_id=record.get("sample_id", ""),
            )
        )
    return judgments


@dataclass(frozen=True)
class ScoreFile:
    """Per-side metric scores keyed by (comparison_id, side)."""

    metric_id: str
    scores: dict[tuple[str, str], float]

    def side(self, comparison_id: str, side: str) -> float:
        try:
            return self.scores[(comparison_id, side)]
        except KeyError:
            raise DataError(
                f"metric {self.metric_id!r} has no score for comparison "
                f"{comparison_id!r} side {side}"
            ) from None


def load_scores(path: str | Path) -> ScoreFile:
    """Load JSON {metric_id, scores: {"<id>:A": x, "<id>:B": y}}."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    scores: dict[tuple[str, str], float] = {}
    for key, value in data["scores"].items():
        comparison_id, _, side = key.rpartition(":")
        if side not in ("A", "B") or not comparison_id:
            raise DataError(f"{path}: malformed score key {key!r} (expected '<id>:A' or '<id>:B')")
        scores[(comparison_id, side)] = float(value)
    return ScoreFile(metric_id=data["metric_id"], scores=scores)


def majority_winner(judgment: PairJudgment) -> str:
    """Strict majority of votes; exact splits are a tie."""
    counts = Counter(judgment.votes)
    if counts["A"] > counts["B"]:
        return "A"
    if counts["B"] > counts["A"]:
        return "B"
    return "tie"


@dataclass(frozen=True)
class AgreementResult:
    rate: float
    tie_fraction: float
    n_used: int
    human_ties: int
    metric_id: str
    criterion: str


def agreement_rate(judgments, scores: ScoreFile, criterion: str) -> AgreementResult:
    """Fraction of human-decided comparisons where the winner scored strictly higher."""
    if criterion not in CRITERIA:
        raise DataError(f"unknown criterion {criterion!r}")
    relevant = [j for j in judgments if j.criterion == criterion]
    agreements = 0
    metric_ties = 0
    human_ties = 0
    n_used = 0
    for judgment in relevant:
        winner = majority_winner(judgment)
        if winner == "tie":
            human_ties += 1
            continue
        n_used += 1
        score_a = scores.side(judgment.comparison_id, "A")
        score_b = scores.side(judgment.comparison_id, "B")
        winner_score, loser_score = (score_a, score_b) if winner == "A" else (score_b, score_a)
        if winner_score > loser_score:
            agreements += 1
        elif winner_score == loser_score:
            metric_ties += 1
    if n_used == 0:
        raise UndefinedAggregateError(f"no decided comparisons for criterion {criterion!r}")
    return AgreementResult(
        rate=agreements / n_used,
        tie_fraction=metric_ties / n_used,
        n_used=n_used,
        human_ties=human_ties,
        metric_id=scores.metric_id,
        criterion=criterion,
    )


def tabulate_votes(label_lists) -> tuple[list[list[int]], list]:
    """Turn per-item label lists into per-item count rows over sorted categories."""
    categories = sorted({label for labels in label_lists for label in labels}, key=str)
    index = {c: i for i, c in enumerate(categories)}
    rows = []
    for labels in label_lists:
        row = [0] * len(categories)
        for label in labels:
            row[index[label]] += 1
        rows.append(row)
    return rows, categories


def gwet_ac1(items) -> float:
    """Chance-corrected inter-annotator agreement over per-item category counts.

    ``items``: one row per item, each a sequence of per-category vote counts
    summing to the (constant) number of raters R.
    """
    rows = [list(row) for row in items]
    if not rows:
        raise UndefinedAggregateError("agreement over an empty item list")
    k = len(rows[0])
    if any(len(row) != k for row in rows):
        raise DataError("all items must cover the same category set")
    if k < 2:
        raise UndefinedAggregateError("agreement needs at least two categories")
    r = sum(rows[0])
    if r < 2:
        raise DataError("agreement needs at least two raters")
    if any(sum(row) != r for row in rows):
        raise DataError("ragged rater counts: every item needs exactly the same number of votes")

    n = len(rows)
    pa = sum(
        sum(count * (count - 1) for count in row) / (r * (r - 1)) for row in rows
    ) / n
    pi = [sum(row[j] for row in rows) / (n * r) for j in range(k)]
    pe = sum(p * (1 - p) for p in pi) / (k - 1)
    if pe >= 1.0:
        raise UndefinedAggregateError("chance agreement is 1; coefficient undefined")
    return (pa - pe) / (1 - pe)
