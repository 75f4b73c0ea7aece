"""Smoke test for the aquaprior extension module.

Build and install first, e.g. ``maturin build --release -m crates/py/Cargo.toml``
followed by ``pip install target/wheels/aquaprior-*.whl``.
"""

import math
import os
import random
import sys
import tempfile

import aquaprior as ap


def random_image(h, w, seed):
    rng = random.Random(seed)
    return ap.Image(h, w, 3, [rng.uniform(0.05, 0.95) for _ in range(h * w * 3)])


def main():
    img = random_image(24, 20, 0)
    assert img.shape == (24, 20, 3)

    bands = ap.haar_dwt2(img)
    back = ap.haar_idwt2(bands["ll"], bands["lh"], bands["hl"], bands["hh"])
    assert back.max_abs_diff(img) < 1e-12

    wb = ap.white_balance(img)
    assert all(0.0 <= v <= 1.0 for v in wb.data())
    fused = ap.fuse_wb(img, wb, (0.0, 0.0, 0.0))
    assert fused.max_abs_diff(img) == 0.0

    assert abs(ap.ciede2000((50, 2.6772, -79.7751), (50, 0, -82.7485)) - 2.0425) < 1e-4
    assert ap.psnr(img, img) == 100.0
    assert abs(ap.ssim(img, img) - 1.0) < 1e-12
    assert ap.uciqe(img) > 0.0

    value, grad = ap.loss("charbonnier", img, img)
    assert value == 1e-3 and max(abs(g) for g in grad.data()) == 0.0
    values, _ = ap.total_loss(img, wb)
    manual = (values["charbonnier"] + 0.1 * values["perceptual"] + 0.1 * values["ssim"]
              + 0.4 * values["edge"] + 0.5 * values["hvi"])
    assert abs(values["total"] - manual) < 1e-9

    rows = ap.grad_check(["charbonnier", "edge"], trials=1, seed=0)
    assert all(passed for *_, passed in rows), rows

    model = ap.Model.random(seed=1, base_channels=8, num_scales=2)
    out = model.forward(img)
    assert out.shape == img.shape
    params, flops = model.cost(256, 256)
    assert params == model.parameter_count and flops > 0

    zero = ap.Model.zeros(base_channels=8, num_scales=2)
    assert zero.forward(img).max_abs_diff(img) == 0.0

    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "w.bin")
        model.save(path)
        again = ap.Model.load(path)
        assert again.to_bytes() == model.to_bytes()
        assert again.forward(img).max_abs_diff(out) == 0.0
        img.save(os.path.join(d, "x.pfm"))
        assert ap.Image.load(os.path.join(d, "x.pfm")).max_abs_diff(img) < 1e-7

    try:
        ap.Model.from_bytes(b"nope")
    except ValueError:
        pass
    else:
        raise AssertionError("corrupted weights accepted")

    stats = model.bench(runs=3, size=32)
    assert stats["runs"] == 3 and math.isfinite(stats["mean_ms"])

    print(f"aquaprior {ap.__version__}: python smoke test passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
