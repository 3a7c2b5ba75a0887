#!/usr/bin/env python3
"""Generate the stand-in project backlogs under data/projects.

Each project matches the published size and story point range. Texts are
synthetic: word choice and length drift with effort so text features carry
some signal. Output is deterministic.
"""
import argparse
import csv
import math
import random
from pathlib import Path

PROJECTS = [
    ("appceleratorstudio", "TISTUD", 2919, 1, 40),
    ("aptanastudio", "APSTUD", 829, 1, 40),
    ("bamboo", "BAM", 521, 1, 20),
    ("clover", "CLOV", 384, 1, 40),
    ("datamanagement", "DM", 4667, 1, 100),
    ("duracloud", "DURACLOUD", 666, 1, 16),
    ("jirasoftware", "JSW", 352, 1, 20),
    ("mesos", "MESOS", 1680, 1, 40),
    ("moodle", "MDL", 1166, 1, 100),
    ("mule", "MULE", 889, 1, 21),
    ("mulestudio", "MULESTUDIO", 732, 1, 34),
    ("springxd", "XD", 3526, 1, 40),
    ("talenddataquality", "TDQ", 1381, 1, 40),
    ("talendesb", "TESB", 868, 1, 13),
    ("titanium", "TIMOB", 2251, 1, 34),
    ("usergrid", "USERGRID", 482, 1, 8),
]

SCALE = [1, 2, 3, 5, 8, 13, 20, 21, 34, 40, 100]

SMALL = "typo label rename tooltip color wording icon spacing link message docs readme alignment".split()
MEDIUM = ("validation dialog endpoint parser filter preference wizard export import option "
          "search sort column template").split()
LARGE = ("migration architecture refactor integration performance security redesign cluster "
         "concurrency protocol scheduler replication framework distributed").split()
COMMON = ("the a to for in on of and with when from user page view editor project build "
          "server client error should update add fix support allow new").split()
VERBS = "Fix Add Update Improve Support Implement Remove Refactor Investigate Allow".split()


def scale_for(max_sp):
    values = [v for v in SCALE if v < max_sp]
    return values + [max_sp]


def story_points(rng, n, max_sp):
    values = scale_for(max_sp)
    weights = [0.62 ** i for i in range(len(values))]
    sps = rng.choices(values, weights=weights, k=n)
    # Both endpoints of the range must occur.
    sps[0] = 1
    sps[1] = max_sp
    rng.shuffle(sps)
    return sps


def text_for(rng, sp, max_sp):
    effort = math.log(sp) / math.log(max(max_sp, 2))
    pools = [(SMALL, 1.0 - effort), (MEDIUM, 1.0 - abs(effort - 0.5) * 2), (LARGE, effort)]

    def word():
        if rng.random() < 0.45:
            return rng.choice(COMMON)
        r = rng.random() * sum(max(w, 0.05) for _, w in pools)
        for pool, w in pools:
            r -= max(w, 0.05)
            if r <= 0:
                return rng.choice(pool)
        return rng.choice(pools[-1][0])

    title = " ".join([rng.choice(VERBS)] + [word() for _ in range(rng.randint(2, 6))])
    length = int(rng.randint(0, 10) + effort * rng.randint(5, 40))
    description = " ".join(word() for _ in range(length))
    return title, description


def splits(n):
    n_train = round(n * 0.6)
    n_val = round(n * 0.2)
    return ["train"] * n_train + ["validation"] * n_val + ["test"] * (n - n_train - n_val)


def write_project(out_dir, name, key, n, max_sp, seed):
    rng = random.Random(f"{seed}:{name}")
    sps = story_points(rng, n, max_sp)
    tags = splits(n)
    path = out_dir / f"{name}.csv"
    with path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["id", "title", "description", "story_point", "split"])
        for i, (sp, split) in enumerate(zip(sps, tags)):
            title, description = text_for(rng, sp, max_sp)
            writer.writerow([f"{key}-{i + 1}", title, description, sp, split])
    return path


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "data" / "projects"))
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, key, n, min_sp, max_sp in PROJECTS:
        assert min_sp == 1
        print(write_project(out_dir, name, key, n, max_sp, args.seed))


if __name__ == "__main__":
    main()
