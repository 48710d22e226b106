"""Smoke test for the `vidapprox` extension module and the CLI artifacts.

Builds the release extension and CLI if needed, imports the module from a
temporary directory, exercises every exported function, then validates CLI
JSON output against schemas/ with jsonschema.

    python3 python/smoke_test.py
"""

import json
import math
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
RELEASE = ROOT / "target" / "release"


def build():
    cargo = ["cargo", "build", "--release", "--offline"]
    subprocess.run(cargo + ["-p", "vidapprox-python", "--features", "extension-module"], cwd=ROOT, check=True)
    subprocess.run(cargo + ["-p", "vidapprox-cli"], cwd=ROOT, check=True)


def import_module(tmp):
    shutil.copy(RELEASE / "libvidapprox.so", tmp / "vidapprox.so")
    sys.path.insert(0, str(tmp))
    import vidapprox

    return vidapprox


def check_kernels(va):
    assert "gauss-ntk" in va.KERNEL_FAMILIES
    spec = va.KernelSpec("gauss-ntk", lengthscale=2.0, alpha=0.5)
    assert spec.family == "gauss-ntk" and spec.lengthscale == 2.0
    x = [[0.1, 0.2, 0.3], [0.4, 0.1, 0.0], [0.9, 0.8, 0.7]]
    k = va.kernel_matrix(x, x, spec)
    for i in range(3):
        for j in range(3):
            assert math.isclose(k[i][j], k[j][i], rel_tol=1e-12)
    assert math.isclose(k[0][1], spec.value(x[0], x[1]), rel_tol=1e-12)
    assert abs(va.mmd2(x, x, spec)) < 1e-12
    assert va.mmd2(x, [[5.0, 5.0, 5.0]], spec) > 0.0

    gauss = va.KernelSpec("gauss", lengthscale=1.0)
    d2 = sum((a - b) ** 2 for a, b in zip(x[0], x[2]))
    assert math.isclose(gauss.value(x[0], x[2]), math.exp(-d2 / 1.0), rel_tol=1e-12)

    try:
        va.KernelSpec("gauss", lengthscale=0.0)
    except va.VidapproxError as e:
        assert e.args[1] in ("spec", "argument", "degenerate-scale"), e.args
    else:
        raise AssertionError("zero length-scale accepted")


def check_segment_and_eval(va):
    videos = va.generate_moving5(3, split="test")
    assert [v["name"] for v in videos] == ["video_000", "video_001", "video_002"]
    v = videos[0]
    assert len(v["frames"]) == len(v["labels"]) == sum(n for _, n in v["plan"])

    uni = va.segment(v["frames"], 5, method="uniform")
    assert uni.prototypes is None and uni.distinct_labels == 5
    assert uni.segments[0][0] == 0 and uni.segments[-1][1] == len(uni)

    ours = va.segment(v["frames"], 5, profile="synthetic", seed=1)
    again = va.segment(v["frames"], 5, profile="synthetic", seed=1)
    assert ours.frame_labels == again.frame_labels
    assert len(ours.prototypes) == 5 and len(ours.train_log) == 11
    assert ours.train_log[-1] <= ours.train_log[0]
    assert ours.kernel.family == "gauss-ntk"
    assert max(ours.frame_labels) < 5

    report = va.evaluate(ours.frame_labels, v["labels"])
    for key in ("mof", "iou", "f1", "boundary_accuracy"):
        assert 0.0 <= report[key] <= 1.0, (key, report[key])
    perfect = va.evaluate([(l + 3) % 7 for l in v["labels"]], v["labels"])
    assert perfect["mof"] == perfect["iou"] == perfect["f1"] == 1.0

    try:
        va.segment([[1.0, 2.0]], 3)
    except va.VidapproxError as e:
        assert e.args[1] == "argument", e.args
    else:
        raise AssertionError("m above the frame count accepted")
    return report


def check_schemas(tmp):
    from jsonschema import Draft202012Validator
    from referencing import Registry, Resource

    schemas = {p.name: json.loads(p.read_text()) for p in (ROOT / "schemas").glob("*.json")}
    registry = Registry().with_resources(
        (name, Resource.from_contents(s)) for name, s in schemas.items()
    )
    seg_v = Draft202012Validator(schemas["segmentation.schema.json"], registry=registry)
    rep_v = Draft202012Validator(schemas["eval_report.schema.json"], registry=registry)

    cli = RELEASE / "vidapprox"
    data = tmp / "data"
    subprocess.run([cli, "gen", "--out", data, "--videos", "2"], check=True)
    for method in ("ours", "uniform", "kmeans", "kernel-kmeans"):
        out = tmp / f"{method}.json"
        subprocess.run(
            [cli, "segment", "--features", data / "test" / "video_000.features.txt",
             "--labels", data / "test" / "video_000.labels.txt", "--m", "5",
             "--profile", "synthetic", "--baseline", method, "--out", out],
            check=True,
        )
        art = json.loads(out.read_text())
        seg_v.validate(art)
        rep_v.validate(art["report"])
        evald = tmp / f"{method}.eval.json"
        subprocess.run(
            [cli, "eval", "--pred", out, "--labels", data / "test" / "video_000.labels.txt", "--out", evald],
            check=True,
        )
        rep_v.validate(json.loads(evald.read_text()))
    return rep_v


def main():
    if "--no-build" not in sys.argv:
        build()
    with tempfile.TemporaryDirectory() as d:
        tmp = Path(d)
        va = import_module(tmp)
        check_kernels(va)
        report = check_segment_and_eval(va)
        rep_v = check_schemas(tmp)
        rep_v.validate(report)
    print("smoke test ok")


if __name__ == "__main__":
    main()
