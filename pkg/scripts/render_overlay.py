#!/usr/bin/env python3
"""Draw digitized series back onto their source chart for visual inspection.

Reads the ``<stem>.graph<k>.json`` documents written by ``graphdigitizer digitize``,
inverts each axis scale to pixel coordinates and plots the points as small
crosses in the inverse of the series colour.

    python scripts/render_overlay.py corpus/chart0003.png out/chart0003.graph0.json overlay.png
"""

import argparse
import json

from PIL import Image, ImageDraw


def to_pixel(scale, value):
    if scale["slope"] == 0:
        return None
    return (value - scale["intercept"]) / scale["slope"]


def main():
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("image")
    parser.add_argument("graph_json")
    parser.add_argument("output")
    parser.add_argument("--every", type=int, default=4, help="plot every n-th point")
    args = parser.parse_args()

    with open(args.graph_json, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc["x_axis"]["kind"] != "linear" or doc["y_axis"]["kind"] != "linear":
        parser.error("overlay needs linear axes; normalized axes carry no pixel mapping")
    img = Image.open(args.image).convert("RGB")
    draw = ImageDraw.Draw(img)
    for series in doc["series"]:
        mark = tuple(255 - c for c in series["color"])
        for x, y in series["points"][::args.every]:
            px, py = to_pixel(doc["x_axis"], x), to_pixel(doc["y_axis"], y)
            draw.line([(px - 2, py), (px + 2, py)], fill=mark)
            draw.line([(px, py - 2), (px, py + 2)], fill=mark)
        print(f"{series['label']!s:>12} ({series['label_source']}): {len(series['points'])} points")
    img.save(args.output)


if __name__ == "__main__":
    main()
