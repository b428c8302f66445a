"""Derive rotation and scale benchmark sets from a seed image.

Rotation: six 40-degree steps from 0 to 200, each paired with its exact
homography.  Scale: four central zooms, 1.25x to 2x.  A manifest lists every
(reference, derived, homography) triple for the evaluation front end.
"""

import json
from pathlib import Path

from elfkit import derive_set
from elfkit.datasets import save_image
from elfkit.synthetic import grid_of_squares

out_root = Path(__file__).parent / "output"
out_root.mkdir(exist_ok=True)

seed_png = out_root / "seed.png"
image, _ = grid_of_squares(height=240, width=320, square=16, pitch=32)
save_image(seed_png, image)

for mode in ("rotation", "scale"):
    out_dir = out_root / f"set_{mode}"
    manifest = derive_set([seed_png], mode, out_dir)
    print(f"{mode}: {len(manifest['pairs'])} pairs in {out_dir}")
    for pair in manifest["pairs"]:
        print(f"  {Path(pair['image2']).name:28s} H -> "
              f"{Path(pair['homography']).name}")

example = json.loads((out_root / "set_rotation" / "manifest.json").read_text())
print(f"manifest keys per pair: {sorted(example['pairs'][0])}")
