#!/usr/bin/env python3
"""Generate the small synthetic dialogue corpus under data/fixture.

Output is a pure function of --seed: vocab.txt (one token per line),
train.jsonl and eval.jsonl (one dialogue per line). A few training
dialogues reuse a 25-word run from an earlier one so n-gram dedup has
something to remove.
"""
import argparse
import json
import random
from pathlib import Path

SPECIAL = ["<unk>", "<|endoftext|>", "<|im_start|>", "<|im_end|>", "system", "user", "assistant"]

FUNCTION = (
    "the a an of to and in is it that for on with as was be by this are or at from "
    "not have but can will we you they he she i my your our their what which how why "
    "when there here then so if do does did has had just also very more most some any"
).split()

TOPICS = {
    "cooking": "recipe oven flour sugar butter salt pepper garlic onion simmer boil bake roast "
               "pan pot knife chop stir taste sauce soup bread dough yeast minutes heat spoon",
    "math": "equation number sum product integer prime proof theorem variable solve derivative "
            "integral matrix vector angle triangle square root fraction divide multiply factor",
    "code": "function variable loop array compile error debug python class method return "
            "string integer pointer memory thread server request response test build library",
    "travel": "flight hotel train ticket passport airport city beach mountain museum map "
              "luggage booking route station tour guide visa border island journey",
    "health": "doctor sleep exercise diet water vitamin muscle heart blood pressure symptom "
              "fever rest stretch walk protein calorie habit stress breathing clinic",
    "music": "guitar piano melody chord rhythm song band drum note scale tempo lyric album "
             "concert singer bass tune harmony practice record",
    "weather": "rain snow wind storm cloud sunny forecast temperature cold warm humid thunder "
               "season winter summer spring autumn frost degrees",
    "finance": "budget saving loan interest bank account credit debt invest stock bond fund "
               "income expense tax salary rent mortgage price market",
}

GREETINGS = "hello hi thanks please sure okay great certainly yes no".split()


def vocabulary():
    words = list(SPECIAL)
    seen = set(words)
    for w in FUNCTION + GREETINGS + [w for t in TOPICS.values() for w in t.split()]:
        if w not in seen:
            seen.add(w)
            words.append(w)
    return words


def sentence(rng, topic_words, length):
    out = []
    for _ in range(length):
        if rng.random() < 0.45:
            out.append(rng.choice(topic_words))
        elif rng.random() < 0.9:
            out.append(rng.choice(FUNCTION))
        else:
            out.append(rng.choice(GREETINGS))
    return out


def dialogue(rng, ident):
    topic = rng.choice(sorted(TOPICS))
    words = TOPICS[topic].split()
    turns = []
    if rng.random() < 0.3:
        turns.append({"role": "system", "content": " ".join(sentence(rng, words, rng.randint(4, 12)))})
    for _ in range(rng.choice([1, 1, 2, 2, 3, 4])):
        turns.append({"role": "user", "content": " ".join(sentence(rng, words, rng.randint(4, 30)))})
        turns.append({"role": "assistant", "content": " ".join(sentence(rng, words, rng.randint(10, 110)))})
    return {"id": ident, "turns": turns}


def plant_overlap(rng, target, donor):
    donor_words = " ".join(t["content"] for t in donor["turns"]).split()
    if len(donor_words) < 25:
        return
    start = rng.randint(0, len(donor_words) - 25)
    turn = rng.choice([t for t in target["turns"] if t["role"] == "assistant"])
    turn["content"] = (turn["content"] + " " + " ".join(donor_words[start:start + 25])).strip()


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="data/fixture")
    ap.add_argument("--seed", type=int, default=20250101)
    ap.add_argument("--train", type=int, default=1200)
    ap.add_argument("--eval", type=int, default=200)
    args = ap.parse_args()

    rng = random.Random(args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "vocab.txt").write_text("\n".join(vocabulary()) + "\n")

    train = [dialogue(rng, f"train-{i:05d}") for i in range(args.train)]
    for i in range(50, args.train, 25):
        plant_overlap(rng, train[i], train[rng.randrange(i)])
    evals = [dialogue(rng, f"eval-{i:05d}") for i in range(args.eval)]

    for name, rows in (("train.jsonl", train), ("eval.jsonl", evals)):
        with open(out / name, "w") as f:
            for row in rows:
                f.write(json.dumps(row, separators=(",", ":")) + "\n")


if __name__ == "__main__":
    main()
