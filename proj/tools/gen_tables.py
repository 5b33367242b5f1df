#!/usr/bin/env python3
"""Regenerates data/emoji.tsv and data/unigrams.tsv.

Requires the `emoji` and `wordsegment` packages.
"""
import argparse
import re
import unicodedata
from pathlib import Path

import emoji
import wordsegment


def clean_name(name: str) -> str:
    name = name.strip(":").replace("_", " ")
    name = unicodedata.normalize("NFKD", name)
    name = "".join(ch for ch in name if not unicodedata.combining(ch))
    name = re.sub(r"[^A-Za-z0-9 ]", "", name).lower()
    return " ".join(name.split())


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "data"))
    parser.add_argument("--unigrams", type=int, default=60000)
    args = parser.parse_args()
    out = Path(args.out)

    rows = []
    for code, info in emoji.EMOJI_DATA.items():
        name = clean_name(info["en"])
        if name:
            rows.append((code, name))
    rows.sort(key=lambda r: [ord(c) for c in r[0]])
    with open(out / "emoji.tsv", "w", encoding="utf-8") as f:
        f.write(f"# emoji<TAB>name words; generated from emoji {emoji.__version__}\n")
        for code, name in rows:
            f.write(f"{code}\t{name}\n")

    wordsegment.load()
    top = sorted(wordsegment.UNIGRAMS.items(), key=lambda kv: (-kv[1], kv[0]))[: args.unigrams]
    with open(out / "unigrams.tsv", "w", encoding="utf-8") as f:
        for word, count in top:
            f.write(f"{word}\t{int(count)}\n")


if __name__ == "__main__":
    main()
