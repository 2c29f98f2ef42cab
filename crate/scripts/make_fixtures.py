#!/usr/bin/env python3
"""Writes the grayscale PGM fixtures used by the test suites.

Training crops come from several scikit-image sample images; the held-out
test crops come from images that are not used for training.
"""

import pathlib

import numpy as np
from skimage import color, data, transform, util

OUT = pathlib.Path(__file__).resolve().parent.parent / "crates" / "core" / "tests" / "data"


def gray(img):
    if img.ndim == 3:
        img = color.rgb2gray(img[..., :3])
    return util.img_as_float(img)


def crop(img, top, left, size, scale=1.0):
    if scale != 1.0:
        img = transform.rescale(img, scale, anti_aliasing=True)
    return img[top : top + size, left : left + size]


def write_pgm(path, img):
    pixels = np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)
    h, w = pixels.shape
    path.write_bytes(b"P5\n%d %d\n255\n" % (w, h) + pixels.tobytes())


def main():
    train = OUT / "train"
    train.mkdir(parents=True, exist_ok=True)
    crops = {
        "astronaut": (gray(data.astronaut()), 40, 60, 96, 0.5),
        "coffee": (gray(data.coffee()), 60, 90, 96, 0.5),
        "rocket": (gray(data.rocket()), 20, 100, 96, 0.5),
        "brick": (gray(data.brick()), 0, 0, 96, 0.5),
        "grass": (gray(data.grass()), 50, 50, 96, 0.5),
        "immuno": (gray(data.immunohistochemistry()), 30, 30, 96, 0.5),
    }
    for name, (img, top, left, size, scale) in crops.items():
        write_pgm(train / f"{name}.pgm", crop(img, top, left, size, scale))
    write_pgm(OUT / "camera64.pgm", crop(gray(data.camera()), 40, 88, 64, 0.5))
    write_pgm(OUT / "chelsea64.pgm", crop(gray(data.chelsea()), 30, 60, 64, 0.5))


if __name__ == "__main__":
    main()
