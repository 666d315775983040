#!/usr/bin/env python3
"""Writes the synthetic offline example under data/example/.

Each record shows one coloured shape. Three mock endpoints stand in for real models: the
subject answers some records right and some wrong, with scripted confidence, and two other
"models" are used by cross_model.
"""
import json
import random
from pathlib import Path

from PIL import Image, ImageDraw

COLORS = {
    "red": (220, 40, 40),
    "green": (40, 170, 60),
    "blue": (40, 70, 220),
    "yellow": (230, 210, 40),
    "purple": (140, 60, 180),
    "orange": (240, 140, 30),
}
SHAPES = ["circle", "square", "triangle"]
N_RECORDS = 20


def draw(path, shape, rgb):
    img = Image.new("RGB", (96, 96), (245, 245, 245))
    d = ImageDraw.Draw(img)
    if shape == "circle":
        d.ellipse((18, 18, 78, 78), fill=rgb)
    elif shape == "square":
        d.rectangle((20, 20, 76, 76), fill=rgb)
    else:
        d.polygon([(48, 14), (82, 80), (14, 80)], fill=rgb)
    img.save(path)


def main():
    out = Path(__file__).resolve().parent.parent / "data" / "example"
    (out / "images").mkdir(parents=True, exist_ok=True)
    rng = random.Random(7)
    names = list(COLORS)

    records, subject, other_a, other_b = [], [], [], []
    for i in range(N_RECORDS):
        shape = SHAPES[i % len(SHAPES)]
        color = names[rng.randrange(len(names))]
        wrong = [c for c in names if c != color]
        rid = f"ex{i:03d}"
        q = f"In picture {i}, what color is the {shape}?"
        draw(out / "images" / f"{rid}.png", shape, COLORS[color])
        records.append({
            "id": rid,
            "dataset": "shapes",
            "question": q,
            "image": f"images/{rid}.png",
            "qa_question": f"In picture {i} the {shape} is painted {color}. What color is the {shape}?",
            "gold": [color],
        })

        knows = rng.random() < 0.6
        says_certain = rng.random() < (0.8 if knows else 0.5)
        answer = color if knows else rng.choice(wrong)
        word = "certain" if says_certain else "uncertain"
        # Sampled answers: a model that knows stays consistent, one that guesses wanders.
        spread = [(answer, 8), (rng.choice(wrong), 2)] if knows else [(answer, 3)] + [(c, 2) for c in wrong[:3]]
        samples = [{"text": f"The {shape} is {t}.", "p": w} for t, w in spread]
        rephrasings = "[" + ",".join(
            f'{k + 1}."{q} Variant {k + 1}."' for k in range(10)) + "]"
        qa = records[-1]["qa_question"]
        subject += [
            {"contains": ["Semantically equivalent questions", q], "answers": [rephrasings]},
            {"contains": ['"certain" after the answer', q],
             "answers": [f"The {shape} is {answer}. {word.capitalize()}"]},
            {"contains": ["probability"], "context": [q],
             "answers": [f"{0.9 if knows else 0.4:.1f}"]},
            {"contains": ["say"], "context": [q], "answers": [word]},
            {"contains": [q], "answers": samples},
            # Text-only questions state the colour, so the subject always gets them right.
            {"contains": ['"certain" after the answer', qa], "answers": [f"The {shape} is {color}. Certain"]},
            {"contains": [qa], "answers": [f"The {shape} is {color}."]},
        ]
        other_a.append({"contains": [q], "answers": [
            {"text": f"The {shape} is {color}.", "p": 2}, {"text": f"The {shape} is {wrong[0]}.", "p": 1}]})
        other_b.append({"contains": [q], "answers": [
            {"text": f"The {shape} is {answer}.", "p": 1}, {"text": f"The {shape} is {wrong[1]}.", "p": 1}]})

    with open(out / "dataset.jsonl", "w") as f:
        for r in records:
            f.write(json.dumps(r) + "\n")
    fallback = "I cannot tell. Uncertain"
    for name, rules in [("mock_subject", subject), ("mock_other_a", other_a), ("mock_other_b", other_b)]:
        with open(out / f"{name}.json", "w") as f:
            json.dump({"seed": 11, "rules": rules, "fallback": fallback}, f, indent=1)
            f.write("\n")


if __name__ == "__main__":
    main()
