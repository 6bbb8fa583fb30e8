"""Regenerates tests/fixtures. Files are written with Pillow and numpy so the
C++ readers are checked against independent encoders."""

import pathlib

import numpy as np
from PIL import Image

root = pathlib.Path(__file__).resolve().parent.parent / "tests" / "fixtures"


def write_pfm_big_endian(path, data):
    """Grayscale PFM, positive scale (big-endian), rows stored bottom to top."""
    h, w = data.shape
    with open(path, "wb") as f:
        f.write(b"Pf\n%d %d\n1.0\n" % (w, h))
        f.write(np.flipud(data).astype(">f4").tobytes())


def main():
    root.mkdir(parents=True, exist_ok=True)

    # P6 3x2, pixel (y, x) = (10 * (3y + x), 100 + y, 200 + x), with a comment line.
    pix = bytes(v for y in range(2) for x in range(3) for v in (10 * (3 * y + x), 100 + y, 200 + x))
    (root / "tiny.ppm").write_bytes(b"P6\n# fixture\n3 2\n255\n" + pix)

    # 8-bit grayscale PNG 2x2.
    Image.fromarray(np.array([[0, 64], [128, 255]], dtype=np.uint8)).save(root / "gray_2x2.png")

    rng = np.random.default_rng(7)
    h, w = 8, 16
    yy, xx = np.mgrid[0:h, 0:w]

    sf = root / "sceneflow"
    for side in ("left", "right"):
        d = sf / "frames_cleanpass" / "TEST" / "A" / "0000" / side
        d.mkdir(parents=True, exist_ok=True)
        Image.fromarray(rng.integers(0, 256, (h, w, 3), dtype=np.uint8)).save(d / "0006.png")
        g = sf / "disparity" / "TEST" / "A" / "0000" / side
        g.mkdir(parents=True, exist_ok=True)
        disp = (yy + xx / 16.0).astype(np.float32)
        if side == "right":
            disp = -disp  # signed export; the loader takes the magnitude
        write_pfm_big_endian(g / "0006.pfm", disp)

    kt = root / "kitti"
    for sub in ("image_2", "image_3"):
        (kt / sub).mkdir(parents=True, exist_ok=True)
        Image.fromarray(rng.integers(0, 256, (h, w, 3), dtype=np.uint8)).save(kt / sub / "000000_10.png")
    occ = (256 * (1 + yy + xx / 4.0)).astype(np.uint16)
    occ[0, :] = 0
    noc = occ.copy()
    noc[:, :3] = 0
    for sub, arr in (("disp_occ_0", occ), ("disp_noc_0", noc)):
        (kt / sub).mkdir(parents=True, exist_ok=True)
        Image.fromarray(arr).save(kt / sub / "000000_10.png")

    # Two-pixel evaluation pair: pred [1, 2], gt [1, 3].
    ev = root / "eval_2px"
    ev.mkdir(parents=True, exist_ok=True)
    write_pfm_big_endian(ev / "pred.pfm", np.array([[1.0, 2.0]], dtype=np.float32))
    write_pfm_big_endian(ev / "gt.pfm", np.array([[1.0, 3.0]], dtype=np.float32))


if __name__ == "__main__":
    main()
