#!/usr/bin/env python3
"""Demonstrate both regimes of the weight trainer on synthetic rewards.

First a uniform-reward environment (every episode succeeds): advantages are
zero, so the mean never moves. Then a discriminative landscape (success iff
the sampled bm25 weight clears 0.35): the mean migrates toward higher bm25.

Usage: python scripts/train_demo.py [seed]
"""

from __future__ import annotations

import sys
from datetime import datetime, timezone

from agentmem.evaluation import BenchmarkQuestion, Session, Turn
from agentmem.learning import TrainConfig, train
from agentmem.scoring import WeightVector


def toy_question(qid: str) -> BenchmarkQuestion:
    session = Session(
        session_id=f"{qid}-s",
        date=datetime(2025, 1, 1, tzinfo=timezone.utc),
        turns=(Turn("user", "hit"),),
    )
    return BenchmarkQuestion(
        question_id=qid,
        question_type="single-session-user",
        question="does it hit",
        answer="hit",
        sessions=(session,),
        answer_session_ids=(f"{qid}-s",),
    )


class EchoContextReader:
    def answer(self, question, context):
        return context


def run(name: str, factory, seed: int) -> None:
    questions = [toy_question(f"q{i}") for i in range(32)]
    cfg = TrainConfig(epochs=4, batch_size=16, question_count=32)
    final, log = train(questions, factory, EchoContextReader(), cfg, seed=seed)
    print(f"== {name} ==")
    print(f"{'batch':>6} {'mean_reward':>12}  weights [sem, bm25, decay, cw, tier]")
    for record in log:
        weights = ", ".join(f"{w:.3f}" for w in record["weights"])
        print(f"{record['batch']:>6} {record['mean_reward']:>12.3f}  [{weights}]")
    start = WeightVector.default()
    deltas = [f"{b - a:+.3f}" for a, b in zip(start.as_list(), final.as_list())]
    print(f"deltas vs start: [{', '.join(deltas)}]\n")


def main() -> None:
    seed = int(sys.argv[1]) if len(sys.argv) > 1 else 7
    run("uniform rewards (zero-variance stasis)", lambda w: (lambda q: "hit"), seed)
    run(
        "bm25-threshold landscape (live gradient)",
        lambda w: (lambda q: "hit" if w.w_bm25 > 0.35 else "miss"),
        seed,
    )


if __name__ == "__main__":
    main()
