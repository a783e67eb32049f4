#!/usr/bin/env python3
"""Generate a synthetic multilingual intent corpus for demos and experiments.

Every class has a distinctive textual stem, so the hash test embedder gives
the data real cluster structure. Utterances are parallel across languages
and share a semantic_key, which makes the corpus usable with the paired
sampling scheme. Optionally emits an "identity translation" copy of the
test split for exercising the translation pipeline.
"""

from __future__ import annotations

import argparse
import json
import os

STEMS = {
    "book_flight": "please book me a flight to",
    "cancel_booking": "cancel my open reservation for",
    "weather": "what is the weather forecast in",
    "play_music": "play some music by artist",
    "set_alarm": "set an alarm for tomorrow at",
}
FILLERS = ["paris", "tokyo", "berlin", "lima", "oslo", "cairo", "quito", "perth", "miami", "dakar"]


def write_split(path: str, split: str, classes, languages, per_class: int) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as f:
        for label in classes:
            for j in range(per_class):
                for lang in languages:
                    rec = {
                        "id": f"{split}-{label}-u{j}-{lang}",
                        "text": f"{STEMS[label]} {FILLERS[j % len(FILLERS)]} variant {j} ({lang})",
                        "label": label,
                        "language": lang,
                        "semantic_key": f"{split}-{label}-u{j}",
                    }
                    f.write(json.dumps(rec) + "\n")
                    n += 1
    return n


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", default="data")
    ap.add_argument("--classes", type=int, default=3, choices=range(2, 6))
    ap.add_argument("--languages", default="en-EN,zh-CN,es-ES,fr-FR,jp-JP,sw-KE,ur-PK,id-ID")
    ap.add_argument("--train-per-class", type=int, default=40,
                    help="parallel utterances per class (each exists in every language)")
    ap.add_argument("--test-per-class", type=int, default=10)
    ap.add_argument("--with-translation", action="store_true",
                    help="also write an identity-translated copy of the test split")
    args = ap.parse_args()

    os.makedirs(args.out_dir, exist_ok=True)
    classes = list(STEMS)[: args.classes]
    languages = [l.strip() for l in args.languages.split(",") if l.strip()]
    n_train = write_split(os.path.join(args.out_dir, "train.jsonl"), "tr",
                          classes, languages, args.train_per_class)
    n_test = write_split(os.path.join(args.out_dir, "test.jsonl"), "te",
                         classes, languages, args.test_per_class)
    print(f"wrote {n_train} train and {n_test} test records to {args.out_dir}/")
    if args.with_translation:
        src = os.path.join(args.out_dir, "test.jsonl")
        dst = os.path.join(args.out_dir, "test_translated.jsonl")
        with open(src, encoding="utf-8") as fin, open(dst, "w", encoding="utf-8") as fout:
            fout.write(fin.read())
        print(f"wrote identity translation to {dst}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
