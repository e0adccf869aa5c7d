#!/usr/bin/env python3
"""Independent generator for the packed-format golden files.

Builds the five worked-example samples, runs a plain first-fit-decreasing
trace over their lengths and serializes each bin with the standard json
module. Run from this directory: python3 make_golden.py
"""
import base64
import json

TARGETS = [2000, 1500, 1200, 900, 500]
CAPACITY = 4096
TOKENS_PER_IMAGE = 144


def sample(k, target):
    images, words = divmod(target, TOKENS_PER_IMAGE)
    return {
        "id": f"pack-{k}",
        "images": [base64.b64encode(f"img-{k}-{j}".encode()).decode() for j in range(images)],
        "text_turns": [
            {"role": "user", "content": " ".join(["what"] * (words // 2))},
            {"role": "assistant", "content": " ".join(["answer"] * (words - words // 2))},
        ],
        "metadata": {"index": str(k), "source": "golden"},
    }


def length(s):
    text = sum(len(t["content"].split()) for t in s["text_turns"])
    return len(s["images"]) * TOKENS_PER_IMAGE + text


def main():
    samples = [sample(k, t) for k, t in enumerate(TARGETS)]
    lengths = [length(s) for s in samples]
    assert lengths == TARGETS, lengths
    order = sorted(range(len(samples)), key=lambda i: (-lengths[i], i))
    bins = []
    for i in order:
        for b in bins:
            if sum(lengths[j] for j in b) + lengths[i] <= CAPACITY:
                b.append(i)
                break
        else:
            bins.append([i])
    assert [[lengths[i] for i in b] for b in bins] == [[2000, 1500, 500], [1200, 900]]
    for n, b in enumerate(bins):
        doc = {"data": [samples[i] for i in b], "lengths": [lengths[i] for i in b]}
        with open(f"bin_{n:06d}.json", "w", encoding="utf-8") as f:
            f.write(json.dumps(doc, separators=(",", ":"), ensure_ascii=False) + "\n")


if __name__ == "__main__":
    main()
