"""Command-line front door.

Subcommands: ``detect`` (saliency + keypoint extraction), ``describe``
(feature-map descriptors at given keypoints), ``eval`` (repeatability and
matching score over a pair manifest), ``derive`` (rotation/scale benchmark
sets), ``gradcheck`` (finite-difference verification of the backward passes).

Exit codes: 0 on success, 1 on a failed verification, 2 on bad input.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import datasets, descriptor, detector, evalkit, netgraph
from . import tensor as T


def _fail(msg, code=2):
    print(f"error: {msg}", file=sys.stderr)
    raise SystemExit(code)


def _load_graph_archive(args, need_weights=True):
    if not args.arch:
        _fail("no architecture given (use --arch or a preset)")
    try:
        arch_path = cfgmod.resolve_arch(args.arch)
    except FileNotFoundError as exc:
        _fail(str(exc))
    graph = netgraph.parse_arch(Path(arch_path).read_text(encoding="utf-8"))
    archive = None
    if need_weights:
        if not args.weights or not Path(args.weights).exists():
            _fail(f"weights file not found: {args.weights}")
        archive = netgraph.WeightArchive.load(args.weights)
        archive.validate_against(graph)
    return graph, archive


def _load_image_for(graph, path):
    if not Path(path).exists():
        _fail(f"image not found: {path}")
    img = datasets.load_image(path)
    if img.shape[0] == 1 and graph.input_channels == 3:
        img = np.repeat(img, 3, axis=0)
    elif img.shape[0] == 3 and graph.input_channels == 1:
        img = img.mean(axis=0, keepdims=True)
    return img


# ---------------------------------------------------------------------------
# detect
# ---------------------------------------------------------------------------

def cmd_detect(args):
    preset = cfgmod.load_preset(args.preset) if args.preset else {}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            preset.update(json.load(fh))
    source = args.saliency or preset.get("saliency", "net")
    args.arch = args.arch or preset.get("arch")

    if source == "net":
        graph, archive = _load_graph_archive(args)
        image = _load_image_for(graph, args.image)
        layer = args.layer or preset.get("detect_layer")
        if not layer:
            _fail("no detection layer given (use --layer or a preset)")
        relu_mode = args.relu_mode or preset.get("relu_mode", "identity")
        smap = netgraph.saliency(graph, archive, image, layer, relu_mode)
    else:
        image = datasets.load_image(args.image)
        fn = detector.sobel_saliency if source == "sobel" else detector.laplacian_saliency
        smap = fn(image)

    cfg = cfgmod.detector_config(preset)
    if args.max_kp:
        cfg = detector.DetectorConfig(
            thr_blur=cfg.thr_blur, noise_blur=cfg.noise_blur, w_nms=cfg.w_nms,
            b_nms=cfg.b_nms, max_keypoints=args.max_kp, nms_metric=cfg.nms_metric)

    kps = detector.detect(smap, cfg)
    h, w = smap.values.shape
    detector.write_keypoints(args.output, kps, (w, h))
    if args.save_saliency:
        v = smap.values
        norm = np.zeros_like(v) if v.max() <= v.min() \
            else (v - v.min()) / (v.max() - v.min()) * 255.0
        datasets.save_image(args.save_saliency, norm)
    print(f"{len(kps)} keypoints -> {args.output}")
    return 0


# ---------------------------------------------------------------------------
# describe
# ---------------------------------------------------------------------------

def cmd_describe(args):
    preset = cfgmod.load_preset(args.preset) if args.preset else {}
    args.arch = args.arch or preset.get("arch")
    graph, archive = _load_graph_archive(args)
    image = _load_image_for(graph, args.image)
    if not Path(args.keypoints).exists():
        _fail(f"keypoint file not found: {args.keypoints}")
    kps, _ = detector.read_keypoints(args.keypoints)
    layers = args.layer or [preset.get("describe_layer")]
    if not layers or layers[0] is None:
        _fail("no description layer given (use --layer or a preset)")

    normalize = not args.no_normalize
    outputs = []
    for layer in layers:
        feature, _ = netgraph.forward_to(graph, archive, image, layer)
        dset = descriptor.describe(feature, kps, image.shape[1:], normalize)
        out = args.output if len(layers) == 1 \
            else str(Path(args.output).with_suffix(f".{layer}.desc"))
        descriptor.write_descriptors(out, dset)
        outputs.append(out)
        print(f"{len(dset)} descriptors (dim {dset.dim}, layer {layer}) -> {out}")
    return 0


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------

def _eval_one(pair, det_dir, desc_dir, eps):
    def kp_file(image_path):
        return Path(det_dir) / (Path(image_path).stem + ".kp")

    def desc_file(image_path):
        return Path(desc_dir) / (Path(image_path).stem + ".desc")

    kps1, _ = detector.read_keypoints(kp_file(pair["image1"]))
    kps2, (w2, h2) = detector.read_keypoints(kp_file(pair["image2"]))
    h = evalkit.read_homography(pair["homography"])
    rec = {
        "image1": pair["image1"], "image2": pair["image2"],
        "kps1": kps1, "kps2": kps2, "h": h, "image_size": (w2, h2),
    }
    if desc_dir:
        d1 = descriptor.read_descriptors(desc_file(pair["image1"]))
        d2 = descriptor.read_descriptors(desc_file(pair["image2"]))
        rec["desc1"], rec["desc2"] = d1, d2
    return rec


def cmd_eval(args):
    if not Path(args.manifest).exists():
        _fail(f"manifest not found: {args.manifest}")
    manifest = datasets.read_manifest(args.manifest)
    pairs = manifest["pairs"]
    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            records = list(pool.map(
                lambda p: _eval_one(p, args.detections, args.descriptors, args.eps),
                pairs))
    else:
        records = [_eval_one(p, args.detections, args.descriptors, args.eps)
                   for p in pairs]
    report = evalkit.evaluate_pairs(records, eps=args.eps)
    evalkit.write_report(args.output, report)
    rep = report["repeatability_mean"]
    ms = report["matching_score_mean"]
    print(f"repeatability_mean={rep:.2f}"
          + (f" matching_score_mean={ms:.2f}" if ms is not None else "")
          + f" -> {args.output}")
    return 0


# ---------------------------------------------------------------------------
# derive
# ---------------------------------------------------------------------------

def cmd_derive(args):
    manifest = datasets.derive_set(args.seeds, args.mode, args.output)
    print(f"{len(manifest['pairs'])} pairs -> {args.output}/manifest.json")
    return 0


# ---------------------------------------------------------------------------
# gradcheck
# ---------------------------------------------------------------------------

def _rel_err(a, b):
    denom = max(np.abs(b).max(), 1e-12)
    return float(np.abs(a - b).max() / denom)


def _fd_grad(fn, x, h=1e-6):
    g = np.zeros_like(x)
    flat = g.ravel()
    xf = x.ravel()
    for i in range(xf.size):
        old = xf[i]
        xf[i] = old + h
        fp = fn(x)
        xf[i] = old - h
        fm = fn(x)
        xf[i] = old
        flat[i] = (fp - fm) / (2.0 * h)
    return g


def gradcheck_graph(graph, archive, image, corrupt_layer=None, tol=1e-6):
    """Central-difference check of every layer's input VJP along the chain.

    Returns a list of (layer, kind, max relative error) rows.  The optional
    ``corrupt_layer`` test hook perturbs that layer's VJP output so the
    failure path can be exercised.
    """
    rng = np.random.default_rng(7)
    rows = []
    x = graph.preprocess(image)
    for spec in graph.layers:
        # Fresh continuous probe per layer: distinct values, clear of the
        # relu kink and of pooling ties, where finite differences are valid.
        probe = rng.normal(size=x.shape)
        if spec.kind == "conv":
            w, b = archive.conv_params(spec.name)
            out = T.conv2d_forward(probe, w, b, spec.stride, spec.pad)
            g = rng.normal(size=out.shape)
            vjp = T.conv2d_vjp_input(g, w, spec.stride, spec.pad, probe.shape)
            fd = _fd_grad(lambda v: float((g * T.conv2d_forward(
                v, w, b, spec.stride, spec.pad)).sum()), probe.copy())
            x = T.conv2d_forward(x, w, b, spec.stride, spec.pad)
        elif spec.kind == "relu":
            g = rng.normal(size=probe.shape)
            vjp = T.relu_vjp(g, probe, mode="mask")
            fd = _fd_grad(lambda v: float((g * T.relu_forward(v)).sum()),
                          probe.copy())
            x = T.relu_forward(x)
        else:
            out, argmax = T.maxpool_forward(probe, spec.pool, spec.stride)
            g = rng.normal(size=out.shape)
            vjp = T.maxpool_vjp(g, argmax, probe.shape)
            fd = _fd_grad(lambda v: float((g * T.maxpool_forward(
                v, spec.pool, spec.stride)[0]).sum()), probe.copy())
            x = T.maxpool_forward(x, spec.pool, spec.stride)[0]
        if corrupt_layer == spec.name:
            vjp = vjp + 1e-3
        rows.append((spec.name, spec.kind, _rel_err(vjp, fd)))
    return rows


def cmd_gradcheck(args):
    graph, _ = _load_graph_archive(args, need_weights=False)
    rng = np.random.default_rng(args.seed)
    archive = netgraph.random_archive(graph, rng)
    image = rng.uniform(0.0, 255.0, size=(graph.input_channels, args.size, args.size))
    rows = gradcheck_graph(graph, archive, image,
                           corrupt_layer=args.corrupt_layer, tol=args.tol)
    worst = 0.0
    for name, kind, err in rows:
        status = "ok" if err < args.tol else "FAIL"
        worst = max(worst, err)
        print(f"{name:<12} {kind:<8} max_rel_err={err:.3e}  {status}")
    if worst < args.tol:
        print(f"gradcheck passed ({len(rows)} layers, tol {args.tol:g})")
        return 0
    print(f"gradcheck FAILED (worst {worst:.3e} >= tol {args.tol:g})",
          file=sys.stderr)
    return 1


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(
        prog="elfkit",
        description="Training-free keypoint detection from CNN feature "
                    "gradients, with evaluation tooling.")
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("detect", help="extract keypoints from an image")
    d.add_argument("image")
    d.add_argument("--arch", help="architecture file (name or path)")
    d.add_argument("--weights", help="ELFW weight archive")
    d.add_argument("--preset", help="preset name, e.g. vgg")
    d.add_argument("--config", help="JSON config overriding the preset")
    d.add_argument("--layer", help="feature map to backpropagate")
    d.add_argument("--relu-mode", choices=["identity", "mask"], dest="relu_mode")
    d.add_argument("--saliency", choices=["net", "sobel", "laplacian"],
                   help="saliency source (default: net)")
    d.add_argument("--max-kp", type=int, dest="max_kp")
    d.add_argument("--save-saliency", dest="save_saliency",
                   help="write the normalised saliency map as PNG")
    d.add_argument("-o", "--output", required=True)
    d.set_defaults(func=cmd_detect)

    s = sub.add_parser("describe", help="describe keypoints from a feature map")
    s.add_argument("image")
    s.add_argument("keypoints")
    s.add_argument("--arch")
    s.add_argument("--weights", required=True)
    s.add_argument("--preset")
    s.add_argument("--layer", action="append",
                   help="description layer; repeat to sweep several layers")
    s.add_argument("--no-normalize", action="store_true", dest="no_normalize")
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_describe)

    e = sub.add_parser("eval", help="repeatability / matching score on a manifest")
    e.add_argument("manifest")
    e.add_argument("--detections", required=True,
                   help="directory of <image-stem>.kp files")
    e.add_argument("--descriptors",
                   help="directory of <image-stem>.desc files (enables ms)")
    e.add_argument("--eps", type=float, default=5.0)
    e.add_argument("--jobs", type=int, default=1)
    e.add_argument("-o", "--output", required=True)
    e.set_defaults(func=cmd_eval)

    v = sub.add_parser("derive", help="derive rotation/scale benchmark sets")
    v.add_argument("seeds", nargs="+")
    v.add_argument("--mode", choices=["rotation", "scale"], required=True)
    v.add_argument("-o", "--output", required=True)
    v.set_defaults(func=cmd_derive)

    g = sub.add_parser("gradcheck", help="finite-difference check of VJPs")
    g.add_argument("--arch", default="tiny.arch")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--size", type=int, default=12)
    g.add_argument("--tol", type=float, default=1e-6)
    g.add_argument("--corrupt-layer", dest="corrupt_layer",
                   help=argparse.SUPPRESS)  # test hook
    g.set_defaults(func=cmd_gradcheck)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SystemExit:
        raise
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
