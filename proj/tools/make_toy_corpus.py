#!/usr/bin/env python3
"""Writes the bundled 200-passage toy corpus (deterministic)."""

import argparse
import json
import random

TOPICS = {
    "arithmetic": [
        "addition", "subtraction", "sum", "total", "numbers", "arithmetic", "carry", "digits",
        "whole", "count", "word", "problems", "place", "value", "mental", "math",
    ],
    "cooking": [
        "recipe", "oven", "flour", "butter", "simmer", "garlic", "onion", "bake", "sauce",
        "knead", "dough", "salt", "pepper", "roast", "stir",
    ],
    "astronomy": [
        "planet", "orbit", "telescope", "galaxy", "star", "comet", "nebula", "gravity", "moon",
        "eclipse", "light", "year", "solar", "system",
    ],
    "gardening": [
        "soil", "compost", "seedling", "prune", "water", "sunlight", "mulch", "roots", "tomato",
        "harvest", "weeds", "garden", "bed",
    ],
    "medicine": [
        "patient", "diagnosis", "symptom", "dose", "clinical", "therapy", "infection", "blood",
        "pressure", "heart", "nurse", "treatment",
    ],
    "finance": [
        "interest", "loan", "budget", "savings", "percent", "tax", "invoice", "price", "discount",
        "profit", "cost", "money", "account",
    ],
}

FILLER = ["the", "a", "of", "and", "to", "in", "is", "for", "with", "on", "can", "how", "you"]
SOURCES = ["wikipedia", "wikihow", "stackexchange"]


def passage(rng, topic):
    words = TOPICS[topic]
    n = rng.randint(18, 60)
    out = []
    for _ in range(n):
        if rng.random() < 0.55:
            out.append(rng.choice(words))
        elif rng.random() < 0.5:
            out.append(rng.choice(FILLER))
        else:
            other = rng.choice(list(TOPICS))
            out.append(rng.choice(TOPICS[other]))
    text = " ".join(out)
    return text[0].upper() + text[1:] + "."


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="data/toy_corpus.jsonl")
    ap.add_argument("--count", type=int, default=200)
    ap.add_argument("--seed", type=int, default=20240531)
    args = ap.parse_args()
    rng = random.Random(args.seed)
    topics = sorted(TOPICS)
    with open(args.out, "w", encoding="utf-8") as f:
        for i in range(args.count):
            topic = topics[i % len(topics)]
            rec = {
                "id": f"p{i:03d}",
                "source": SOURCES[rng.randrange(len(SOURCES))],
                "text": passage(rng, topic),
            }
            f.write(json.dumps(rec) + "\n")


if __name__ == "__main__":
    main()
