#!/usr/bin/env python3
# Copyright 2026 The Cropline Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.


# Regenerates the bundled replay fixture: embeddings, knowledge base, message
# log, evidence images and config. Output is deterministic.
import json
import os

import numpy as np
from PIL import Image, ImageDraw

HERE = os.path.dirname(os.path.abspath(__file__))
rng = np.random.default_rng(7)

DIM = 16
CLUSTERS = {
    "watering": ["water", "moisture", "irrigate", "soil", "wet", "drench", "plant",
                 "plants", "add", "damp"],
    "treatment": ["spray", "apply", "fungicide", "copper", "remove", "infected",
                  "leaves", "leaf", "destroy", "prune", "neem", "oil", "treat"],
    "schedule": ["week", "weekly", "every", "daily", "days", "twice", "morning"],
    "nutrient": ["potassium", "fertilizer", "nitrogen", "compost", "manure", "feed"],
    "drainage": ["drainage", "improve", "raised", "beds", "avoid", "overhead",
                 "stagnant", "mulch", "straw"],
    "disease": ["blight", "early", "late", "rust", "mildew", "spots", "brown",
                "yellow", "fungus", "tomato"],
}

centers = {}
basis = np.linalg.qr(rng.normal(size=(DIM, DIM)))[0]
for i, name in enumerate(CLUSTERS):
    centers[name] = basis[:, i]

lines = []
for name, words in CLUSTERS.items():
    for w in words:
        v = centers[name] * 1.0 + rng.normal(scale=0.15, size=DIM)
        v = v / np.linalg.norm(v)
        lines.append(w + " " + " ".join(f"{x:.6f}" for x in v))
with open(os.path.join(HERE, "embeddings.txt"), "w") as f:
    f.write(f"{len(lines)} {DIM}\n")
    f.write("\n".join(lines) + "\n")

kb_rows = [
    ("summer", "Early Blight", "Remove the infected leaves and apply copper fungicide weekly",
     "0.3", "13.5", "aphids;whitefly", "3-6"),
    ("summer", "Leaf Rust", "Spray neem oil every morning and water the soil", "0.3",
     "13.5", "mites", "3-6"),
    ("rainy", "Early Blight", "Improve drainage and avoid overhead water, spray copper fungicide",
     "0.9", "11.0", "slugs;snails", "7-10"),
    ("rainy", "Late Blight", "Destroy infected plants and improve drainage", "0.9", "11.0",
     "slugs", "7-10"),
    ("winter", "Early Blight", "Mulch with straw and feed compost", "0.5", "10.0",
     "aphids", "11;12;1;2"),
]
with open(os.path.join(HERE, "kb.csv"), "w") as f:
    f.write("season_id,disease_name,solution,water_availability,daylight_hours,"
            "dangerous_pests,active_months\n")
    for r in kb_rows:
        f.write(",".join('"' + c + '"' if "," in c else c for c in r) + "\n")


def leaf(brightness=0):
    img = Image.new("RGB", (96, 64), (40, 90, 40))
    d = ImageDraw.Draw(img)
    for x in range(96):
        d.line([(x, 0), (x, 63)], fill=(40 + x // 2, 90 + x // 3, 40))
    d.ellipse([10, 8, 86, 56], fill=(60, 150, 50))
    for cx, cy, r in [(30, 25, 6), (55, 35, 8), (70, 20, 5), (40, 45, 4)]:
        d.ellipse([cx - r, cy - r, cx + r, cy + r], fill=(110, 70, 30))
    if brightness:
        a = np.asarray(img).astype(int) + brightness
        img = Image.fromarray(np.clip(a, 0, 255).astype(np.uint8))
    return img


def noise(seed):
    g = np.random.default_rng(seed)
    return Image.fromarray(g.integers(0, 256, size=(64, 96, 3), dtype=np.uint8))


os.makedirs(os.path.join(HERE, "references", "early_blight"), exist_ok=True)
leaf().save(os.path.join(HERE, "references", "early_blight", "reference_leaf.png"))
leaf(brightness=10).save(os.path.join(HERE, "farmer_leaf.png"))
leaf(brightness=10).save(os.path.join(HERE, "reply_leaf.png"))
noise(11).save(os.path.join(HERE, "unrelated.png"))

T0 = 1625097600  # 2021-07-01 00:00:00 UTC
log = [
    {"id": "p1", "author": "farmer_ravi", "ts": T0,
     "text": "My tomato leaves have brown spots, please help! #savemyplant",
     "image": "farmer_leaf.png", "parent": None},
    {"id": "r3", "author": "grower_anu", "ts": T0 + 58,
     "text": "Name: Early Blight Solution: Remove infected leaves and spray copper "
             "fungicide every week #savemyplant",
     "image": "reply_leaf.png", "parent": "p1"},
    {"id": "r1", "author": "user_kumar", "ts": T0 + 60, "text": "Add water #savemyplant",
     "image": None, "parent": "p1"},
    {"id": "r2", "author": "user_meena", "ts": T0 + 60,
     "text": "add potassium fertilizer #savemyplant", "image": None, "parent": "p1"},
]
with open(os.path.join(HERE, "log.jsonl"), "w") as f:
    for m in log:
        f.write(json.dumps(m) + "\n")

with open(os.path.join(HERE, "pipeline.cfg"), "w") as f:
    f.write("""# Copyright 2026 The Cropline Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.


# Replay configuration for the bundled fixture.
hashtag = #savemyplant
kb_path = kb.csv
embeddings_path = embeddings.txt
stopwords_path = ../stopwords_en.txt
reference_dir = references
image_check = perceptual
image_threshold = 10
weight_labeled = 1.5
weight_image = 1.25
drift_window = 30
ransac_confidence = 0.99
ransac_sample_size = 2
ransac_inlier_ratio = 0.5
ransac_inlier_threshold = 0.05
slope_threshold = 0.01
seed = 20211
current_season = summer
auto_switch = false
""")
