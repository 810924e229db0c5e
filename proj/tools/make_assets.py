#!/usr/bin/env python3
"""Regenerate the bundled desk-scale image assets under data/.

All source images ship with scikit-image and are CC0 / public domain
(see data/LICENSE.md). Outputs are 8-bit binary PGM files.
"""
import argparse
import pathlib

import numpy as np
from skimage import color, data, transform


def gray(img):
    if img.ndim == 3:
        img = color.rgb2gray(img[..., :3])
    else:
        img = img.astype(np.float64) / 255.0
    return img


def square_resize(img, size, box=None):
    if box is not None:
        r0, c0, side = box
        img = img[r0:r0 + side, c0:c0 + side]
    else:
        side = min(img.shape)
        r0 = (img.shape[0] - side) // 2
        c0 = (img.shape[1] - side) // 2
        img = img[r0:r0 + side, c0:c0 + side]
    return transform.resize(img, (size, size), anti_aliasing=True)


def write_pgm(path, img):
    px = np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)
    h, w = px.shape
    with open(path, "wb") as f:
        f.write(b"P5\n%d %d\n255\n" % (w, h))
        f.write(px.tobytes())


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=str(pathlib.Path(__file__).resolve().parents[1] / "data"))
    out = pathlib.Path(ap.parse_args().out)
    for sub in ("test", "train", "sr", "tune"):
        (out / sub).mkdir(parents=True, exist_ok=True)

    # Denoising test images.
    write_pgm(out / "test" / "camera.pgm", square_resize(gray(data.camera()), 128))
    write_pgm(out / "test" / "coffee.pgm",
              square_resize(gray(data.coffee()), 128, box=(20, 150, 360)))
    write_pgm(out / "test" / "chelsea.pgm",
              square_resize(gray(data.chelsea()), 128, box=(0, 60, 300)))

    # External training corpus.
    train = {
        "astronaut": (gray(data.astronaut()), None, 192),
        "rocket": (gray(data.rocket()), (60, 150, 360), 192),
        "moon": (gray(data.moon()), None, 192),
        "brick": (gray(data.brick()), None, 160),
        "gravel": (gray(data.gravel()), None, 160),
        "grass": (gray(data.grass()), None, 160),
        "hubble": (gray(data.hubble_deep_field()), (100, 100, 600), 192),
    }
    for name, (img, box, size) in train.items():
        write_pgm(out / "train" / f"{name}.pgm", square_resize(img, size, box))

    # Super-resolution ground truth (126 = 3 * 42).
    write_pgm(out / "sr" / "chelsea_hr.pgm",
              square_resize(gray(data.chelsea()), 126, box=(20, 130, 250)))

    # Held-out parameter tuning image.
    write_pgm(out / "tune" / "coins.pgm",
              square_resize(gray(data.coins()), 128, box=(0, 0, 300)))


if __name__ == "__main__":
    main()
