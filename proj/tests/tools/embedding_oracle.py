#!/usr/bin/env python3
"""Independent reference for the offline trigram embedding and the context
selection predicates. Used to derive expected values frozen into tests;
kept free of any dependency on the C++ sources.

Scheme: ASCII-lowercase the text, hash every 3-byte window with FNV-1a 64
into one of `dim` buckets (whole text as a single gram when shorter than
3 bytes), count hits, L2-normalize.
"""

import json
import math
import sys

FNV_OFFSET = 14695981039346656037
FNV_PRIME = 1099511628211
MASK = (1 << 64) - 1


def fnv1a(data: bytes) -> int:
    h = FNV_OFFSET
    for b in data:
        h = ((h ^ b) * FNV_PRIME) & MASK
    return h


def ascii_lower(text: str) -> str:
    return "".join(chr(ord(c) + 32) if "A" <= c <= "Z" else c for c in text)


def embed(text: str, dim: int = 256):
    if not text:
        raise ValueError("empty text")
    data = ascii_lower(text).encode("ascii")
    grams = [data[i:i + 3] for i in range(len(data) - 2)] if len(data) >= 3 else [data]
    v = [0.0] * dim
    for g in grams:
        v[fnv1a(g) % dim] += 1.0
    n = math.sqrt(sum(x * x for x in v))
    return [x / n for x in v]


def cosine(a, b):
    dot = sum(x * y for x, y in zip(a, b))
    na = math.sqrt(sum(x * x for x in a))
    nb = math.sqrt(sum(x * x for x in b))
    return max(-1.0, min(1.0, dot / (na * nb)))


def sim(text_a: str, text_b: str, dim: int = 256) -> float:
    return cosine(embed(text_a, dim), embed(text_b, dim))


def main():
    if len(sys.argv) == 3:
        print(json.dumps({"similarity": sim(sys.argv[1], sys.argv[2])}))
    else:
        print("usage: embedding_oracle.py TEXT_A TEXT_B", file=sys.stderr)
        sys.exit(2)


if __name__ == "__main__":
    main()
