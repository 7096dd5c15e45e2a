#!/usr/bin/env python3
"""Regenerate tests/data/synthetic20.jsonl.

Twenty hand-designed questions over small multi-session haystacks, mixing all
six question types. Gold answers appear verbatim (lowercase) inside their
gold sessions so the oracle reader and oracle-context mode are exact by
construction; a handful of questions use deliberately gappy vocabulary so
lexical retrieval has room to fail. Deterministic: no randomness anywhere.
"""

from __future__ import annotations

import json
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "tests" / "data" / "synthetic20.jsonl"

NOISE_POOL = [
    ("the weather stayed grey all afternoon", "grey skies call for staying indoors"),
    ("traffic on the ring road was slow again", "maybe leave earlier next time"),
    ("watered the ferns and the cactus", "plants look healthier already"),
    ("the printer jammed twice this morning", "try the rear tray for thick paper"),
    ("leftover curry for dinner tonight", "spice level was just right"),
    ("the elevator inspection is scheduled", "use the stairs until noon"),
    ("podcast episode about deep sea vents", "microbes living off methane"),
    ("new strings on the old guitar", "tuning holds much better now"),
]


def noise_session(i: int) -> list[dict]:
    user_line, assistant_line = NOISE_POOL[i % len(NOISE_POOL)]
    return [
        {"role": "user", "content": user_line},
        {"role": "assistant", "content": assistant_line},
    ]


def gold_session(*turns: tuple[str, str]) -> list[dict]:
    return [{"role": role, "content": content} for role, content in turns]


# (qid, type, question, answer, gold sessions, extra noise count)
# Each gold session is (turns, is_answer_session).
QUESTIONS = [
    (
        "q01", "single-session-user",
        "What is the user's favorite color?", "cobalt blue",
        [(gold_session(("user", "by the way, my favorite color is cobalt blue"),
                       ("assistant", "noted, a fine choice")), True)],
    ),
    (
        "q02", "single-session-user",
        "What breed of dog did the user adopt?", "beagle",
        [(gold_session(("user", "i adopted a beagle named biscuit last weekend"),
                       ("assistant", "biscuit sounds adorable")), True)],
    ),
    (
        "q03", "single-session-user",
        "Where is the user's office located?", "harborview tower",
        [(gold_session(("user", "my office is in the harborview tower now"),
                       ("assistant", "that commute should be easier")), True)],
    ),
    (
        "q04", "single-session-user",
        "What color is the user's bicycle?", "crimson",
        [(gold_session(("user", "i commute on my crimson velocipede every day"),
                       ("assistant", "pedal power beats traffic")), True)],
    ),
    (
        "q05", "single-session-user",
        "What is the name of the user's sister?", "marisol",
        [(gold_session(("user", "my sister tells everyone her name: marisol"),
                       ("assistant", "marisol, got it")), True)],
    ),
    (
        "q06", "single-session-assistant",
        "When does the museum open on weekdays?", "9 am",
        [(gold_session(("user", "planning a museum visit"),
                       ("assistant", "the museum opens at 9 am on weekdays")), True)],
    ),
    (
        "q07", "single-session-assistant",
        "Which bridge does the fastest route cross?", "iron bridge",
        [(gold_session(("user", "how should i drive to the depot"),
                       ("assistant", "the fastest route crosses the iron bridge")), True)],
    ),
    (
        "q08", "single-session-assistant",
        "What dish was recommended for lunch?", "gazpacho",
        [(gold_session(("user", "any ideas for a light midday meal"),
                       ("assistant", "the soup of the day is gazpacho, try it")), True)],
    ),
    (
        "q09", "knowledge-update",
        "What is the user's current passcode hint?", "walnut",
        [
            (gold_session(("user", "my passcode hint is maple for now"),
                          ("assistant", "stored away")), False),
            (gold_session(("user", "update: i changed my passcode hint to walnut"),
                          ("assistant", "hint refreshed")), True),
        ],
    ),
    (
        "q10", "knowledge-update",
        "What time is the team standup now?", "2 pm",
        [
            (gold_session(("user", "the team standup is at 10 am"),
                          ("assistant", "calendar updated")), False),
            (gold_session(("user", "heads up, the team standup moved to 2 pm"),
                          ("assistant", "moved the block")), True),
        ],
    ),
    (
        "q11", "knowledge-update",
        "Which gym does the user currently belong to?", "peak fitness",
        [
            (gold_session(("user", "my gym membership is at ironworks"),
                          ("assistant", "good lifting there")), False),
            (gold_session(("user", "i switched my gym membership to peak fitness"),
                          ("assistant", "fresh start")), True),
        ],
    ),
    (
        "q12", "temporal-reasoning",
        "On what date did the user adopt the kitten?", "march 3",
        [(gold_session(("user", "i adopted the kitten on march 3"),
                       ("assistant", "a spring kitten")), True)],
    ),
    (
        "q13", "temporal-reasoning",
        "On which day did the conference badge arrive?", "tuesday",
        [(gold_session(("user", "the conference badge arrived on tuesday"),
                       ("assistant", "one less thing to chase")), True)],
    ),
    (
        "q14", "temporal-reasoning",
        "When does the user's passport expire?", "june 2027",
        [(gold_session(("user", "reminder that my passport expires in june 2027"),
                       ("assistant", "renew well before then")), True)],
    ),
    (
        "q15", "temporal-reasoning",
        "When did the user sign the apartment contract again?", "last friday",
        [(gold_session(("user", "the lease renewal happened last friday"),
                       ("assistant", "congrats on another year")), True)],
    ),
    (
        "q16", "multi-session",
        "Which two cities are on the user's itinerary?", "lisbon and porto",
        [
            (gold_session(("user", "i am planning stops in lisbon this spring"),
                          ("assistant", "lovely city")), False),
            (gold_session(("user", "the lisbon and porto itinerary is locked in"),
                          ("assistant", "two great stops")), True),
        ],
    ),
    (
        "q17", "multi-session",
        "Which two books are on the user's reading list?", "dune then hyperion",
        [
            (gold_session(("user", "my reading list starts with dune"),
                          ("assistant", "a classic opener")), False),
            (gold_session(("user", "after that the list is dune then hyperion"),
                          ("assistant", "solid pairing")), True),
        ],
    ),
    (
        "q18", "multi-session",
        "What does the party budget cover?", "venue rental and catering",
        [
            (gold_session(("user", "budget line one: venue rental"),
                          ("assistant", "logged")), False),
            (gold_session(("user", "so the party budget covers venue rental and catering"),
                          ("assistant", "all set then")), True),
        ],
    ),
    (
        "q19", "single-session-preference",
        "What seating does the user prefer on flights?", "window seats",
        [(gold_session(("user", "i usually prefer window seats on long flights"),
                       ("assistant", "window it is")), True)],
    ),
    (
        "q20", "single-session-preference",
        "What is the user's preferred tea?", "oolong",
        [(gold_session(("user", "for hot drinks i always reach for oolong"),
                       ("assistant", "a dependable pick")), True)],
    ),
]

NOISE_SESSIONS_PER_QUESTION = 4


def build_question(index: int, row) -> dict:
    qid, qtype, question, answer, gold_rows, *_ = row
    sessions: list[list[dict]] = []
    session_ids: list[str] = []
    dates: list[str] = []
    answer_ids: list[str] = []

    day = 1
    for j, (turns, is_answer) in enumerate(gold_rows):
        sid = f"{qid}-g{j}"
        sessions.append(turns)
        session_ids.append(sid)
        dates.append(f"2025-03-{day:02d}")
        if is_answer:
            answer_ids.append(sid)
        day += 3
    for j in range(NOISE_SESSIONS_PER_QUESTION):
        sid = f"{qid}-n{j}"
        sessions.append(noise_session(index + j))
        session_ids.append(sid)
        dates.append(f"2025-03-{day:02d}")
        day += 1

    return {
        "question_id": qid,
        "question_type": qtype,
        "question": question,
        "answer": answer,
        "question_date": "2025-03-15T00:00:00+00:00",
        "haystack_session_ids": session_ids,
        "haystack_dates": dates,
        "haystack_sessions": sessions,
        "answer_session_ids": answer_ids,
    }


def main() -> None:
    OUT.parent.mkdir(parents=True, exist_ok=True)
    records = [build_question(i, row) for i, row in enumerate(QUESTIONS)]
    with OUT.open("w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record, ensure_ascii=False) + "\n")
    print(f"wrote {len(records)} questions to {OUT}")


if __name__ == "__main__":
    main()
