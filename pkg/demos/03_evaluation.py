#!/usr/bin/env python3
"""Score retrieval runs with MRR@k and NegRecall@k.

MRR@k rewards ranking a positive passage early; NegRecall@k measures the
fraction of explicitly negated passages that leak into the top k (lower is
better). Questions with no explicit negatives are excluded from the
NegRecall average rather than counted as free successes.
"""

from boolsearch import (
    Judgment,
    QuestionType,
    RankedList,
    ScoredDoc,
    evaluate_run,
    render_report,
)

judgments = [
    Judgment("q1", "What is solar power and how is it stored?",
             QuestionType.AND, frozenset({"p2"}), frozenset({"p5"})),
    Judgment("q2", "How do turbines or panels make electricity?",
             QuestionType.OR, frozenset({"p1", "p3"}), frozenset()),
    Judgment("q3", "What heats homes but is unrelated to burning fuel?",
             QuestionType.NOT, frozenset({"p4"}), frozenset({"p6"})),
]


def ranked(*doc_ids):
    return RankedList(
        ScoredDoc(d, float(len(doc_ids) - i)) for i, d in enumerate(doc_ids)
    )


run = {
    "q1": ranked("p9", "p2", "p5"),        # positive at rank 2, negative leaked
    "q2": ranked("p3", "p8", "p1"),        # positive at rank 1
    "q3": ranked("p7", "p8", "p9"),        # miss: positive absent, negative excluded
}

report = evaluate_run(run, judgments, k=10)
print(render_report(report))
print()
print("same report as JSON:")
print(render_report(report, fmt="json"))
