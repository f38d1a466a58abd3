"""Writes the small demo dataset under data/demo (deterministic)."""
import json
import random
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "data" / "demo"
MODELS = ["BLIP-2", "OFA", "GIT", "ExpNet-v2", "ViT-GPT2"]

SCENES = [
    ("a metal cup filled with scissors and other utensils",
     ["a cup holding scissors and spoons", "metal utensils standing in a cup", "scissors and spoons in a silver cup"]),
    ("a giraffe standing in the middle of a field",
     ["a giraffe standing in a grassy field", "a tall giraffe in an open field", "one giraffe standing on the grass"]),
    ("a herd of sheep standing in a field",
     ["sheep grazing on a green hill", "a group of sheep in a pasture", "several sheep standing together on grass"]),
    ("a man riding a wave on top of a surfboard",
     ["a surfer riding a large wave", "a man surfing in the ocean", "a person on a surfboard in the water"]),
    ("a plate of food with broccoli and rice",
     ["a plate with rice and green broccoli", "a dinner plate of broccoli and rice", "food on a white plate"]),
    ("a red double decker bus driving down a street",
     ["a red bus on a city street", "a double decker bus in traffic", "a bus driving past some buildings"]),
    ("a cat sleeping on top of a laptop keyboard",
     ["a cat lying on a laptop", "a sleepy cat on a computer keyboard", "a gray cat resting on a keyboard"]),
    ("two people flying kites on a sandy beach",
     ["people flying kites at the beach", "two kites in the sky over a beach", "a couple with kites on the sand"]),
    ("a train traveling down tracks next to a forest",
     ["a train moving along the tracks", "a passenger train near some trees", "a long train on railroad tracks"]),
    ("a bowl of fruit sitting on a wooden table",
     ["apples and bananas in a bowl", "a fruit bowl on a table", "a wooden table with a bowl of fruit"]),
]

VARIANTS = [
    lambda s: s,
    lambda s: s.replace(" a ", " the ", 1),
    lambda s: " ".join(s.split()[:6]),
    lambda s: s + " in the picture",
    lambda s: "an image of " + s,
]

# The first image reproduces the five pairs shown for the cup example.
CUP_SCORES = {
    "BLIP-2": (0.9907, 0.4846),
    "OFA": (0.9745, 0.4891),
    "GIT": (0.7402, 0.4180),
    "ExpNet-v2": (0.5186, 0.4272),
    "ViT-GPT2": (0.0689, 0.3646),
}


def main() -> None:
    rng = random.Random(7)
    OUT.mkdir(parents=True, exist_ok=True)
    corpus, candidates, scores = [], [], []
    for i, (base, gts) in enumerate(SCENES):
        image_id = f"demo-{i:02d}"
        corpus.append({"image_id": image_id, "uri": f"images/{image_id}.jpg", "ground_truths": gts})
        cands = []
        for m, model in enumerate(MODELS):
            text = VARIANTS[(i + m) % len(VARIANTS)](base)
            cands.append({"model_id": model, "text": text})
            if i == 0:
                p, c = CUP_SCORES[model]
            else:
                p, c = round(rng.uniform(0.05, 0.99), 4), round(rng.uniform(0.30, 0.50), 4)
            scores.append({"image_id": image_id, "model_id": model,
                           "matching_probability": p, "cosine_similarity": c})
        candidates.append({"image_id": image_id, "candidates": cands})
        scores.append({"image_id": image_id, "model_id": "fusion",
                       "matching_probability": round(rng.uniform(0.6, 0.99), 4),
                       "cosine_similarity": round(rng.uniform(0.40, 0.50), 4)})

    def dump(name, rows):
        (OUT / name).write_text("".join(json.dumps(r) + "\n" for r in rows))

    dump("corpus.jsonl", corpus)
    dump("candidates.jsonl", candidates)
    dump("scores.jsonl", scores)
    config = {
        "corpus": "corpus.jsonl",
        "candidates": "candidates.jsonl",
        "output_dir": "out",
        "seed": 42,
        "workers": 4,
        "scorer": {"kind": "file", "path": "scores.jsonl"},
        "fusion": {"kind": "mock", "fallback": "join"},
        "metrics": {"cider_variant": "cider-d"},
    }
    (OUT / "config.json").write_text(json.dumps(config, indent=2) + "\n")


if __name__ == "__main__":
    main()
