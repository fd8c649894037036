#!/usr/bin/env python3
"""Regenerates events.jsonl and consolidation_uu.jsonl.

The stream covers 150 hours ending at hour 480555 (2024-10-27 03:00 UTC).
Three steady topics post every hour; in the last three hours a world cup
story, a messi story and a taylor swift story take off, next to a sensitive
and a generic burst that post-processing must remove, and a small topic that
stays under the unique-user floor.
"""
import json
import random
from pathlib import Path

HERE = Path(__file__).resolve().parent
LAST = 480555
FIRST = LAST - 149

rng = random.Random(2026)
seq = 0
events = []


def post(hour, user, country, **signals):
    global seq
    seq += 1
    ev = {
        "post_id": f"f{seq:06d}",
        "user_id": user,
        "ts": hour * 3600 + rng.randrange(3600),
        "country": country,
    }
    ev.update(signals)
    events.append(ev)


def users(prefix, n, pool):
    return [f"{prefix}{i:05d}" for i in rng.sample(range(pool), n)]


def country(weights):
    codes, w = zip(*weights)
    return rng.choices(codes, weights=w)[0]


steady = [
    ("r", "easy pasta recipe for dinner", ["recipe"], ["food", "kitchen"], [("US", 5), ("IT", 3), ("GB", 2)]),
    ("m", "minecraft build tour part", ["minecraft"], ["screen", "game"], [("US", 4), ("DE", 3), ("BR", 2)]),
    ("o", "fall outfit ideas", ["ootd"], ["person", "clothing"], [("US", 3), ("FR", 3), ("GB", 2)]),
]

for hour in range(FIRST, LAST + 1):
    for prefix, caption, tags, visual, geo in steady:
        for u in users(prefix, rng.randint(8, 14), 400):
            post(hour, u, country(geo), caption=caption, hashtags=tags, visual_tags=visual)
    for u in users("w", rng.randint(0, 3), 300):
        post(hour, u, country([("BR", 3), ("US", 2)]), caption="watching old world cup highlights",
             visual_tags=["soccer", "screen"])

cup_geo = [("BR", 5), ("AR", 4), ("US", 3), ("MX", 3), ("FR", 2)]
cup_captions = [
    ("world cup 2026 draw is out", "the groups for the world cup 2026 are set"),
    ("world cup 2026 qualifiers tonight", "qualifiers kick off tonight"),
    ("counting down to world cup 2026", ""),
    ("world cup fever already", "who wins the world cup"),
]
for k, hour in enumerate(range(LAST - 2, LAST + 1)):
    for u in users("c", 40 + 25 * k, 2000):
        caption, transcript = rng.choice(cup_captions)
        post(hour, u, country(cup_geo), caption=caption, transcript=transcript,
             visual_tags=["soccer", "stadium"], ocr_text="2026" if rng.random() < 0.3 else "")
    for u in users("s", 15 + 10 * k, 1000):
        post(hour, u, country([("AR", 5), ("US", 3), ("ES", 3)]), caption="messi says he feels ready",
             hashtags=["messi"], visual_tags=["soccer", "person"])

for k, hour in enumerate(range(LAST - 1, LAST + 1)):
    for u in users("t", 25 + 20 * k, 1000):
        post(hour, u, country([("US", 6), ("GB", 3), ("CA", 2)]), caption="taylor swift surprise song tonight",
             visual_tags=["concert", "crowd"], transcript="she played it live")
    for u in users("x", 30 + 10 * k, 1000):
        post(hour, u, country([("US", 1)]), caption="weapons haul", visual_tags=["table"])
    for u in users("g", 30 + 15 * k, 1000):
        post(hour, u, country([("US", 2), ("IN", 2)]), caption="best funny videos compilation",
             visual_tags=["person"])

for u in users("p", 20, 500):
    post(LAST, u, "US", caption="pumpkin spice latte season", visual_tags=["cup", "coffee"])

events.sort(key=lambda e: (e["ts"], e["post_id"]))
with open(HERE / "events.jsonl", "w") as out:
    for e in events:
        out.write(json.dumps(e, ensure_ascii=False, separators=(",", ":")) + "\n")

# Pre-extracted topics with disjoint user sets: 120, 90 and 40 unique users in
# the detection hour.
uu = []
for topic, n, prefix in [("world cup 2026", 120, "a"), ("world cup", 90, "b"), ("world cup 2026 qualifiers", 40, "q")]:
    for i in range(n):
        uu.append({"post_id": f"{prefix}{i:04d}", "user_id": f"{prefix}user{i:04d}",
                   "ts": LAST * 3600 + (i * 7) % 3600, "country": "US", "topics": [topic]})
uu.sort(key=lambda e: (e["ts"], e["post_id"]))
with open(HERE / "consolidation_uu.jsonl", "w") as out:
    for e in uu:
        out.write(json.dumps(e, separators=(",", ":")) + "\n")
