#!/usr/bin/env python3
"""Writes the bundled 20-user toy corpus and its mock-client fixtures."""

import argparse
import json
import random
from pathlib import Path

TOPICS = ["hiking", "baking", "chess", "guitar", "cycling", "poetry", "gardening", "astronomy",
          "pottery", "sailing", "painting", "running", "birding", "knitting", "climbing", "fishing",
          "cooking", "diving", "skating", "camping"]
PLACES = ["lisbon", "oslo", "kyoto", "lima", "cairo", "quebec", "hanoi", "perth", "dublin", "tunis"]
FACT_WORDS = ["capital", "river", "mountain", "island", "desert", "harbor", "volcano", "lake"]
ANSWER = "zanzibar"


def user_record(i, rng):
    topic = TOPICS[i]
    place = PLACES[i % len(PLACES)]
    sessions = []
    for s in range(4):
        day = 1 + s * 3 + rng.randrange(3)
        sessions.append({
            "session_id": f"t{i:02d}-s{s}",
            "timestamp": f"2024-03-{day:02d}",
            "turns": [
                {"speaker": "user", "utterance": f"I spent the weekend {topic} near {place} again"},
                {"speaker": "assistant", "utterance": f"That sounds lovely, {topic} near {place} suits you"},
                {"speaker": "user", "utterance": f"Which {FACT_WORDS[(i + s) % 8]} should I visit next for {topic}?"},
                {"speaker": "assistant", "utterance": f"You mentioned {ANSWER} last time, it is great for {topic}"},
            ],
        })
    uid = f"toy{i:02d}"
    return {
        "user_id": uid,
        "question_date": "2024-04-01",
        "sessions": sessions,
        "personalized_qa": {"qa_id": f"p-{uid}", "user_id": uid, "kind": "personalized",
                            "question": f"Where did you suggest I go {topic}?", "gold_answer": ANSWER},
    }


def facts():
    out = []
    for t, topic in enumerate(TOPICS):
        for k in range(5):
            word = FACT_WORDS[(t + k) % 8]
            out.append({"qa_id": f"f{t:02d}-{k}", "kind": "factual",
                        "question": f"Which {word} is famous among {topic} travellers?",
                        "gold_answer": ANSWER})
    return out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "data" / "toy"))
    ap.add_argument("--judge-salt", default="toy")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rng = random.Random(11)
    with open(out / "users.jsonl", "w") as f:
        for i in range(20):
            f.write(json.dumps(user_record(i, rng)) + "\n")
    with open(out / "facts.jsonl", "w") as f:
        for q in facts():
            f.write(json.dumps(q) + "\n")

    def dump(name, obj):
        (out / name).write_text(json.dumps(obj, indent=2) + "\n")

    dump("backend.json", {"depth": 4, "hidden_dim": 16, "heads": 2, "vocab_size": 64, "seed": 7,
                          "planted": {"block": 3, "boost_word": ANSWER, "magnitude": 50,
                                      "trigger_word": "history"}})
    dump("judge.json", {"id": "toy-judge",
                        "rules": [{"contains": "strict and impartial evaluator",
                                   "hash_choice": {"options": ["Correct", "Incorrect"],
                                                   "salt": args.judge_salt}}],
                        "hash_choice": {"options": ["yes", "no"], "salt": args.judge_salt}})
    dump("llm.json", {"id": "toy-summarizer",
                      "rules": [{"contains": "DPL", "replies": ["The user asks about one hobby and one place."]}],
                      "default": "The user enjoys an outdoor hobby near a favourite city."})
    dump("student.json", {"id": "toy-student",
                          "hash_choice": {"options": ["Could you explain the second step again?",
                                                      "Thanks, that is clear.\nEND_OF_LEARNING"],
                                          "salt": "student"}})
    dump("config.json", {"backend": "backend.json", "judge": "judge.json", "llm": "llm.json",
                         "student": "student.json", "embedder": "hash", "method": "RAG",
                         "variant": "H", "tau": 0.5, "gamma": 3.0, "max_new_tokens": 12,
                         "parallel": 1})


if __name__ == "__main__":
    main()
