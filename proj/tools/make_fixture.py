#!/usr/bin/env python3
# Copyright 2026 The W2S Label Engine Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Regenerates the synthetic test fixture under tests/data.

Twenty small aerial-looking scenes split over four source datasets, one per
annotation dialect. Output is deterministic for a given numpy/Pillow.
"""

import argparse
import json
import pathlib

import numpy as np
from PIL import Image

PALETTE = {
    "white": (235, 235, 235),
    "black": (25, 25, 25),
    "red": (200, 35, 35),
    "blue": (40, 70, 200),
    "yellow": (225, 210, 45),
    "orange": (230, 130, 35),
}

# source name -> (dialect, partition, raw labels -> canonical, image sizes)
SOURCES = {
    "dotalike": ("dota-txt", "train",
                 {"plane": "plane", "ship": "ship", "small-vehicle": "small-vehicle",
                  "storage-tank": "storage-tank", "helicopter": "helicopter", "harbor": "harbor"},
                 [(1400, 1100), (1100, 300), (320, 256), (320, 256), (256, 256), (256, 256)]),
    "diorlike": ("voc-xml", "train",
                 {"airplane": "airplane", "vehicle": "vehicle", "Ground Track Field": "ground-track-field",
                  "windmill": "windmill", "stadium": "stadium", "bridge": "bridge"},
                 [(320, 320), (320, 320), (256, 256), (256, 256), (256, 256)]),
    "xviewlike": ("coco-json", "val",
                  {"Bus": "bus", "Small Car": "small-car", "Truck": "truck", "Building": "building"},
                  [(300, 300), (300, 300), (256, 256), (256, 256), (256, 256)]),
    "tsvlike": ("plain-tsv", "val",
                {"car": "car", "van": "van", "motorboat": "motorboat", "ship": "ship"},
                [(256, 256), (256, 256), (288, 256), (256, 288)]),
}


def background(rng, w, h):
    base = rng.integers(60, 140, size=3)
    img = np.empty((h, w, 3), dtype=np.int16)
    img[:] = base
    coarse = rng.integers(-12, 13, size=(h // 16 + 1, w // 16 + 1, 1), dtype=np.int16)
    img += np.kron(coarse, np.ones((16, 16, 1), dtype=np.int16))[:h, :w]
    # a road stripe
    y = int(rng.integers(0, h))
    img[max(0, y - 6):y + 6, :, :] = 100
    return np.clip(img, 0, 255).astype(np.uint8)


def place_objects(rng, w, h, labels):
    objs = []
    n = int(rng.integers(2, 6))
    raw = list(labels)
    # repeat one label/colour pair so some captions match several instances
    twin_label = raw[int(rng.integers(len(raw)))]
    twin_color = list(PALETTE)[int(rng.integers(len(PALETTE)))]
    for k in range(n):
        for _ in range(50):
            bw = int(rng.integers(max(8, w // 40), max(12, w // 5)))
            bh = int(rng.integers(max(8, h // 40), max(12, h // 5)))
            x1 = int(rng.integers(0, w - bw))
            y1 = int(rng.integers(0, h - bh))
            box = (x1, y1, x1 + bw, y1 + bh)
            if all(box[2] + 3 < o[0][0] or o[0][2] + 3 < box[0] or box[3] + 3 < o[0][1] or o[0][3] + 3 < box[1]
                   for o in objs):
                break
        if k < 2:
            label, color = twin_label, twin_color
        else:
            label = raw[int(rng.integers(len(raw)))]
            color = list(PALETTE)[int(rng.integers(len(PALETTE)))]
        objs.append((box, label, color))
    return objs


def paint(img, objs):
    for (x1, y1, x2, y2), _, color in objs:
        img[y1:y2, x1:x2] = PALETTE[color]
    return img


def write_source(root, rng, name, spec):
    dialect, partition, labels, sizes = spec
    src = root / name
    (src / "images").mkdir(parents=True, exist_ok=True)
    ann_dir = src / "annotations"
    ann_dir.mkdir(exist_ok=True)
    coco = {"images": [], "annotations": [], "categories": []}
    cat_ids = {lab: i + 1 for i, lab in enumerate(labels)}
    coco["categories"] = [{"id": i, "name": lab} for lab, i in cat_ids.items()]
    tsv = ["image\twidth\theight\tx1\ty1\tx2\ty2\tcategory"]
    for idx, (w, h) in enumerate(sizes):
        stem = f"{name[:2]}{idx:03d}"
        objs = place_objects(rng, w, h, labels)
        Image.fromarray(paint(background(rng, w, h), objs)).save(src / "images" / f"{stem}.png", optimize=False)
        if dialect == "dota-txt":
            lines = ["imagesource:synthetic", "gsd:0.5"]
            for (x1, y1, x2, y2), lab, _ in objs:
                lines.append(f"{x1} {y1} {x2} {y1} {x2} {y2} {x1} {y2} {lab} 0")
            (ann_dir / f"{stem}.txt").write_text("\n".join(lines) + "\n")
        elif dialect == "voc-xml":
            parts = [f"<annotation><filename>{stem}.png</filename>",
                     f"<size><width>{w}</width><height>{h}</height><depth>3</depth></size>"]
            for (x1, y1, x2, y2), lab, _ in objs:
                parts.append(f"<object><name>{lab}</name><bndbox><xmin>{x1}</xmin><ymin>{y1}</ymin>"
                             f"<xmax>{x2}</xmax><ymax>{y2}</ymax></bndbox></object>")
            parts.append("</annotation>")
            (ann_dir / f"{stem}.xml").write_text("\n".join(parts) + "\n")
        elif dialect == "coco-json":
            coco["images"].append({"id": idx + 1, "file_name": f"{stem}.png", "width": w, "height": h})
            for (x1, y1, x2, y2), lab, _ in objs:
                coco["annotations"].append({"id": len(coco["annotations"]) + 1, "image_id": idx + 1,
                                            "category_id": cat_ids[lab], "bbox": [x1, y1, x2 - x1, y2 - y1]})
        else:
            for (x1, y1, x2, y2), lab, _ in objs:
                tsv.append(f"{stem}.png\t{w}\t{h}\t{x1}\t{y1}\t{x2}\t{y2}\t{lab}")
    if dialect == "coco-json":
        (ann_dir / "instances.json").write_text(json.dumps(coco, indent=1) + "\n")
    elif dialect == "plain-tsv":
        (ann_dir / "labels.tsv").write_text("\n".join(tsv) + "\n")
    cfg = [f"name = {name}", f"dialect = {dialect}", f"image_root = {name}/images", f"annotations = {name}/annotations",
           f"partition = {partition}", "", "[categories]"]
    cfg += [f"{raw} = {canon}" for raw, canon in labels.items()]
    (root / f"{name}.cfg").write_text(CFG_HEADER + "\n".join(cfg) + "\n")


def golden_scene(path):
    rng = np.random.default_rng(5)
    img = background(rng, 128, 128)
    img[30:42, 20:44] = PALETTE["white"]
    img[60:100, 60:90] = PALETTE["yellow"]
    img[10:70, 100:124] = PALETTE["blue"]
    Image.fromarray(img).save(path, optimize=False)


CFG_HEADER = """\
# Copyright 2026 The W2S Label Engine Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=str(pathlib.Path(__file__).resolve().parent.parent / "tests" / "data"))
    args = ap.parse_args()
    out = pathlib.Path(args.out)
    fixture = out / "fixture"
    fixture.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(20240601)
    for name, spec in SOURCES.items():
        write_source(fixture, rng, name, spec)
    golden_scene(out / "golden_scene.png")


if __name__ == "__main__":
    main()
