#!/usr/bin/env python3
"""Regenerates the bundled fixture set.

Everything is derived from fixed seeds, so running this twice yields
identical files. Outputs (next to this script):

  grid.json          10x10 jittered grid graph with a raised half and some diagonals
  categories.json    landmark categories per scan
  detections.json    mock detector output keyed by scan/viewpoint
  embeddings.json    mock text and crop embeddings
  toy_lm.json        bigram language model with a copy mechanism
  panoramas.json     36 view vectors per viewpoint
  config.toml        5 trajectories x 2 decoding variants
  eval_lang.jsonl    small hypothesis/reference corpus
  eval_nav.jsonl     four navigation episodes
"""

import itertools
import json
import math
import os
import random

HERE = os.path.dirname(os.path.abspath(__file__))
SCAN = "grid01"
SIZE = 10
SPACING = 2.0
DIM = 8
PANO_W = 1024

LABELS = ["bed", "chair", "door", "lamp", "picture", "plant", "sofa", "staircase", "table", "window"]
ADJECTIVES = ["wooden", "small", "large", "white"]
NOUNS = ["hallway", "room", "kitchen", "bathroom", "stairs", "rug", "counter"]

TEMPLATE_WORDS = (
    "go straight turn slightly moderately hardly right left to the rear sharply backwards "
    "and walk upwards downwards towards of"
).split()

CORPUS = [
    "walk past the chair and turn left",
    "go up the stairs and stop at the door",
    "turn right and walk towards the table",
    "walk straight down the hallway",
    "exit the room and turn left at the sofa",
    "stop next to the bed",
    "walk towards the large window and wait",
    "turn around and walk past the kitchen counter",
    "go down the stairs and turn right",
    "walk into the bathroom and stop",
    "turn slightly left and walk towards the plant",
    "walk past the wooden table and stop near the lamp",
    "go straight through the door and turn right",
    "walk to the small picture on the left",
    "turn left and walk up the staircase",
    "walk across the rug towards the white sofa",
    "wait by the door",
    "walk forward and stop in front of the chair",
]


def r6(x):
    return round(x, 6)


def unit(rng, dim=DIM):
    v = [rng.gauss(0.0, 1.0) for _ in range(dim)]
    n = math.sqrt(sum(x * x for x in v))
    return [x / n for x in v]


def vid(r, c):
    return f"vp_{r}_{c}"


def build_graph(rng):
    viewpoints = []
    for r in range(SIZE):
        for c in range(SIZE):
            z = 0.0 if r < 5 else 0.45 * (r - 4)
            viewpoints.append({
                "id": vid(r, c),
                "pos": [r6(c * SPACING + rng.uniform(-0.12, 0.12)),
                        r6(r * SPACING + rng.uniform(-0.12, 0.12)),
                        r6(z + rng.uniform(-0.02, 0.02))],
            })
    edges = []
    for r in range(SIZE):
        for c in range(SIZE):
            if c + 1 < SIZE:
                edges.append([vid(r, c), vid(r, c + 1)])
            if r + 1 < SIZE:
                edges.append([vid(r, c), vid(r + 1, c)])
            if r + 1 < SIZE and c + 1 < SIZE and (r + c) % 3 == 0:
                edges.append([vid(r, c), vid(r + 1, c + 1)])
            if r + 1 < SIZE and c >= 1 and (r * 7 + c) % 5 == 0:
                edges.append([vid(r, c), vid(r + 1, c - 1)])
    return {"scan_id": SCAN, "viewpoints": viewpoints, "edges": edges}


def build_detections(rng, graph):
    out = {}
    for vp in graph["viewpoints"]:
        dets = []
        for _ in range(rng.randint(0, 5)):
            label = rng.choice(LABELS)
            w = rng.randint(30, 220)
            x0 = rng.randint(0, PANO_W - w - 1)
            y0 = rng.randint(200, 600)
            dets.append({
                "label": label,
                "bbox": [x0, y0, x0 + w, y0 + rng.randint(40, 300)],
                "confidence": round(rng.uniform(0.3, 0.99), 2),
            })
        out[f"{SCAN}/{vp['id']}"] = dets
    return out


def key_num(x):
    # matches Rust's f64 Display for the integral values used here
    return str(int(x)) if float(x).is_integer() else repr(float(x))


def build_embeddings(rng, detections):
    base = {w: unit(rng) for w in LABELS + ADJECTIVES + NOUNS}
    base["stairs"] = [r6(0.8 * a + 0.2 * b) for a, b in zip(base["staircase"], base["stairs"])]
    text = {w: [r6(x) for x in v] for w, v in base.items()}
    singles = LABELS + ADJECTIVES + NOUNS
    for a, b in itertools.product(singles, repeat=2):
        if a != b:
            text[f"{a} {b}"] = [r6(0.4 * x + 0.6 * y) for x, y in zip(base[a], base[b])]
    image = {}
    for key, dets in detections.items():
        for d in dets:
            v = [x + rng.gauss(0.0, 0.15) for x in base[d["label"]]]
            k = f"{key}/" + ",".join(key_num(x) for x in d["bbox"])
            image[k] = [r6(x) for x in v]
    return {"text": text, "image": image}


def build_lm(rng):
    words = []
    for w in TEMPLATE_WORDS + LABELS + ADJECTIVES + NOUNS + " ".join(CORPUS).split():
        if w not in words:
            words.append(w)
    tokens = ["<s>", "</s>"] + words
    counts = {t: {} for t in tokens}
    for sentence in CORPUS:
        seq = ["<s>"] + sentence.split() + ["</s>"]
        for a, b in zip(seq, seq[1:]):
            counts[a][b] = counts[a].get(b, 0) + 1
    bigram = {}
    for t in tokens:
        if t == "</s>":
            continue
        row = dict(counts[t])
        row["</s>"] = row.get("</s>", 0) + 0.05
        total = sum(row.values())
        bigram[t] = {k: r6(v / total * 0.999) for k, v in sorted(row.items())}
    # non-negative representations keep similarities in [0, 1]
    reps = {t: [r6(abs(x)) for x in unit(rng)] for t in tokens}
    return {
        "tokens": tokens,
        "bos": "<s>",
        "eos": "</s>",
        "copy_weight": 0.7,
        "bigram": bigram,
        "reps": reps,
    }


def build_panoramas(rng, graph):
    return {
        f"{SCAN}/{vp['id']}": [[r6(rng.uniform(-1, 1)) for _ in range(4)] for _ in range(36)]
        for vp in graph["viewpoints"]
    }


CONFIG = """\
# 5 trajectories x 2 decoding variants over the bundled grid.
seed = 2024
workers = 2
output = "out/dataset.jsonl"

[sampling]
graphs = ["grid.json"]
trajectories_per_graph = 5
min_steps = 5
max_steps = 7

[[variants]]
alpha = 0.5
k = 4

[[variants]]
alpha = 0.7
k = 8

[providers.detector]
kind = "fixture"
path = "detections.json"

[providers.embedder]
kind = "fixture"
path = "embeddings.json"

[providers.lm]
kind = "toy"
path = "toy_lm.json"

[landmarks]
categories = "categories.json"
anchor = "exit_waypoint"

[speaker]
max_len = 40
pano_features = "panoramas.json"
"""

EVAL_LANG = [
    {"id": "a", "hyp": "walk past the chair and turn left", "refs": ["walk past the chair and turn left at the door", "go past the chair then turn left"]},
    {"id": "b", "hyp": "go up the stairs and stop at the door", "refs": ["walk up the stairs and wait at the door"]},
    {"id": "c", "hyp": "turn right and walk towards the table", "refs": ["turn right and walk to the table", "head right towards the wooden table"]},
]

EVAL_NAV = [
    {"id": "e1", "path": [[0, 0, 0], [3, 4, 0]], "goal": [3, 4, 0], "geodesic": 5.0},
    {"id": "e2", "path": [[0, 0, 0], [10, 0, 0], [10, 10, 0]], "goal": [10, 12, 0], "geodesic": 10.0},
    {"id": "e3", "path": [[0, 0, 0], [4, 0, 0]], "goal": [10, 0, 0], "geodesic": 10.0},
    {"id": "e4", "path": [[1, 1, 0]], "goal": [1, 1, 0], "geodesic": 0.0},
]


def dump(name, obj):
    with open(os.path.join(HERE, name), "w") as f:
        json.dump(obj, f, indent=1, sort_keys=True)
        f.write("\n")


def main():
    rng = random.Random(20240611)
    graph = build_graph(rng)
    detections = build_detections(rng, graph)
    dump("grid.json", graph)
    dump("categories.json", {SCAN: LABELS})
    dump("detections.json", detections)
    dump("embeddings.json", build_embeddings(rng, detections))
    dump("toy_lm.json", build_lm(rng))
    dump("panoramas.json", build_panoramas(rng, graph))
    with open(os.path.join(HERE, "config.toml"), "w") as f:
        f.write(CONFIG)
    for name, rows in [("eval_lang.jsonl", EVAL_LANG), ("eval_nav.jsonl", EVAL_NAV)]:
        with open(os.path.join(HERE, name), "w") as f:
            for row in rows:
                f.write(json.dumps(row) + "\n")


if __name__ == "__main__":
    main()
