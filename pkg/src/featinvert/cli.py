"""Command-line surface: sample, train, invert, eval, glyph, replay.

Every command writes a run manifest (command, parameters, seeds, input
hashes, version, wall time) next to its outputs; `replay` re-runs a command
from its manifest and reproduces byte-identical outputs. Exit codes:
0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import hashlib
import json
import os
import sys
import time

import click
import numpy as np

from . import __version__
from .baselines import (
    EldaDatabase,
    StationaryGaussianModel,
    build_eigen_basis,
    build_elda_database,
    direct_invert,
    elda_invert,
    fit_stationary_gaussian,
    greedy_triangle_invert,
    nudged_invert,
    ridge_invert,
    subset_invert,
)
from .errors import FeatInvertError
from .evaluate import (
    diversity_curve,
    diversity_record,
    feature_distance_bins,
    ratio_density,
    recursion_test,
    run_ncc_benchmark,
)
from .features import FeatureDescriptor, HogExtractor, hog_extract, hog_glyph
from .imaging import ImagePatch, PatchCorpus, load_image, sample_patches, save_image
from .inversion import (
    InversionSet,
    build_affinity,
    invert_multiple,
    invert_single,
    invert_weight_template,
)
from .sparse import PairedDictionary, learn_paired_dictionary


def _default_jobs():
    try:
        return max(1, int(os.environ.get("FEATINVERT_JOBS", "1")))
    except ValueError:
        return 1


def _hash_file(path):
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _hash_input(path):
    if os.path.isdir(path):
        digest = hashlib.sha256()
        for root, _, names in sorted(os.walk(path)):
            for name in sorted(names):
                digest.update(name.encode())
                digest.update(_hash_file(os.path.join(root, name)).encode())
        return digest.hexdigest()
    if os.path.exists(path):
        return _hash_file(path)
    return None


def _write_manifest(out_dir, command, params, inputs, started):
    manifest = {
        "command": command,
        "params": params,
        "inputs": {k: _hash_input(v) for k, v in inputs.items() if v},
        "version": __version__,
        "wall_time_s": round(time.time() - started, 3),
    }
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "run_manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)


def _parse_size(text):
    try:
        h, w = text.lower().split("x")
        return int(h), int(w)
    except ValueError:
        raise click.UsageError(f"--size must look like 64x64, got {text!r}")


def _load_config(path):
    if path is None:
        return {}
    cfg = {}
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line or "=" not in line:
                continue
            key, val = (s.strip() for s in line.split("=", 1))
            cfg[key] = val.strip("\"'")
    return cfg


@click.group()
@click.version_option(__version__)
def main():
    """Invert visual feature descriptors back to images."""


@main.command()
@click.option("--dir", "image_dir", required=True, type=click.Path(exists=True))
@click.option("--size", required=True, help="patch size, e.g. 64x64")
@click.option("--count", required=True, type=int)
@click.option("--seed", default=0, type=int, show_default=True)
@click.option("--gray/--rgb", "gray", default=False, show_default=True)
@click.option("--out", required=True, type=click.Path())
def sample(image_dir, size, count, seed, gray, out):
    """Sample a patch corpus from an image directory."""
    started = time.time()
    h, w = _parse_size(size)
    shape = (h, w, 1) if gray else (h, w, 3)
    try:
        corpus = sample_patches(image_dir, shape, count, seed)
        corpus.save(out)
    except FeatInvertError as exc:
        raise click.ClickException(str(exc))
    _write_manifest(
        out, "sample",
        {"dir": image_dir, "size": size, "count": count, "seed": seed, "gray": gray},
        {"dir": image_dir}, started,
    )
    click.echo(f"wrote {len(corpus)} patches to {out}")


@main.command()
@click.argument("model_kind", type=click.Choice(["pairdict", "gaussian"]))
@click.option("--corpus", "corpus_dir", required=True, type=click.Path(exists=True))
@click.option("--k", default=512, type=int, show_default=True)
@click.option("--lambda", "lam", default=0.1, type=float, show_default=True)
@click.option("--psi1", default=1.0, type=float, show_default=True)
@click.option("--psi2", default=1.0, type=float, show_default=True)
@click.option("--epochs", default=10, type=int, show_default=True)
@click.option("--lambda-reg", default=1.0, type=float, show_default=True)
@click.option("--max-offset", default=9, type=int, show_default=True)
@click.option("--cell-size", default=8, type=int, show_default=True)
@click.option("--seed", default=0, type=int, show_default=True)
@click.option("--config", type=click.Path(exists=True), default=None,
              help="key=value file echoed into the manifest")
@click.option("--out", required=True, type=click.Path())
def train(model_kind, corpus_dir, k, lam, psi1, psi2, epochs, lambda_reg,
          max_offset, cell_size, seed, config, out):
    """Train a paired dictionary (PDCT) or stationary Gaussian model (SGAU)."""
    started = time.time()
    if k < 1:
        raise click.UsageError("--k must be >= 1")
    extractor = HogExtractor()
    try:
        corpus = PatchCorpus.load(corpus_dir)
        if model_kind == "pairdict":
            model = learn_paired_dictionary(
                corpus, extractor, K=k, lam=lam, psi1=psi1, psi2=psi2,
                epochs=epochs, seed=seed,
            )
            model.save(out)
            click.echo(f"final training objective: {model.objectives[-1]:.6f}")
        else:
            model = fit_stationary_gaussian(
                corpus, extractor, lambda_reg=lambda_reg,
                max_offset=max_offset, cell_size=cell_size,
            )
            model.save(out)
            click.echo("fitted stationary Gaussian model")
    except FeatInvertError as exc:
        raise click.ClickException(str(exc))
    _write_manifest(
        os.path.dirname(os.path.abspath(out)) or ".", f"train {model_kind}",
        {
            "corpus": corpus_dir, "k": k, "lambda": lam, "psi1": psi1,
            "psi2": psi2, "epochs": epochs, "lambda_reg": lambda_reg,
            "max_offset": max_offset, "cell_size": cell_size, "seed": seed,
            "out": out, "config": _load_config(config),
        },
        {"corpus": corpus_dir}, started,
    )


def _descriptor_from_args(image, descriptor):
    if (image is None) == (descriptor is None):
        raise click.UsageError("provide exactly one of --image or --descriptor")
    if image is not None:
        return hog_extract(load_image(image)), load_image(image)
    with open(descriptor, "rb") as fh:
        return FeatureDescriptor.deserialize(fh.read()), None


@main.command()
@click.option("--method", required=True, type=click.Choice([
    "pairdict", "ridge", "direct", "elda", "nudged", "subset",
    "triangles", "weight-template",
]))
@click.option("--model", "model_path", type=click.Path(exists=True), default=None)
@click.option("--image", type=click.Path(exists=True), default=None)
@click.option("--descriptor", type=click.Path(exists=True), default=None)
@click.option("--n", default=1, type=int, show_default=True)
@click.option("--gamma", default=1.0, type=float, show_default=True)
@click.option("--affinity", default="identity", show_default=True,
              help="identity|edge|color|spatial:maskfile")
@click.option("--topk", default=20, type=int, show_default=True)
@click.option("--budget", default=10000, type=int, show_default=True)
@click.option("--restarts", default=2, type=int, show_default=True)
@click.option("--seed", default=0, type=int, show_default=True)
@click.option("--jobs", default=None, type=int, help="defaults to FEATINVERT_JOBS")
@click.option("--montage/--no-montage", default=False, show_default=True,
              help="also write a side-by-side montage with the HOG glyph")
@click.option("--out", required=True, type=click.Path())
def invert(method, model_path, image, descriptor, n, gamma, affinity, topk,
           budget, restarts, seed, jobs, montage, out):
    """Invert one descriptor (from an image or a serialized descriptor)."""
    started = time.time()
    del jobs  # single-descriptor command; kept for interface stability
    extractor = HogExtractor()
    needs_model = method in ("pairdict", "nudged", "subset", "weight-template", "ridge", "elda", "direct")
    if needs_model and model_path is None:
        raise click.UsageError(f"--method {method} requires --model")
    try:
        phi, _source = _descriptor_from_args(image, descriptor)
        if method in ("pairdict", "nudged", "subset", "weight-template"):
            dictionary = PairedDictionary.load(model_path)
            if method == "pairdict":
                aff = _parse_affinity(affinity, dictionary.patch_shape)
                inv_set = invert_multiple(phi, dictionary, N=n, gamma=gamma,
                                          affinity=aff, extractor=extractor)
            elif method == "weight-template":
                inv_set = _singleton_set(invert_weight_template(phi, dictionary),
                                         phi, extractor)
            elif method == "nudged":
                inv_set = nudged_invert(phi, dictionary, N=n, gamma=gamma,
                                        seed=seed, extractor=extractor)
            else:
                inv_set = subset_invert(phi, dictionary, N=n, extractor=extractor)
        elif method == "ridge":
            model = StationaryGaussianModel.load(model_path)
            inv_set = _singleton_set(ridge_invert(phi, model), phi, extractor)
        elif method == "elda":
            db = EldaDatabase.load(model_path)
            inv_set = _singleton_set(elda_invert(phi, db, topk=topk), phi, extractor)
        elif method == "direct":
            model = StationaryGaussianModel.load(model_path)
            basis = build_eigen_basis(model, (phi.grid[0], phi.grid[1]))
            inv_set = _singleton_set(
                direct_invert(phi, basis, extractor, restarts=restarts, seed=seed),
                phi, extractor,
            )
        else:  # triangles
            inv_set = _singleton_set(
                greedy_triangle_invert(phi, extractor, budget=budget, seed=seed),
                phi, extractor,
            )
        inv_set.save(out)
        if montage:
            save_image(_montage(inv_set[0], phi), os.path.join(out, "montage.png"))
    except FeatInvertError as exc:
        raise click.ClickException(str(exc))
    _write_manifest(
        out, f"invert {method}",
        {
            "method": method, "model": model_path, "image": image,
            "descriptor": descriptor, "n": n, "gamma": gamma,
            "affinity": affinity, "topk": topk, "budget": budget,
            "restarts": restarts, "seed": seed, "montage": montage,
        },
        {"model": model_path, "image": image, "descriptor": descriptor}, started,
    )
    click.echo(f"wrote {len(inv_set)} inversion(s) to {out}")


def _singleton_set(patch, phi, extractor):
    """Wrap a one-image inversion so every method emits the same sidecar."""
    try:
        resid = float(np.linalg.norm(extractor(patch).values - phi.values))
    except FeatInvertError:
        resid = float("nan")
    return InversionSet(
        patches=[patch],
        residuals=[resid],
        gamma=0.0,
        affinity_kind=None,
        pre_clip_ranges=[(float(patch.data.min()), float(patch.data.max()))],
    )


def _parse_affinity(text, patch_shape):
    if text.startswith("spatial:"):
        mask_img = load_image(text.split(":", 1)[1])
        return build_affinity("spatial", patch_shape, mask=mask_img.data[:, :, 0] > 0.5)
    return build_affinity(text, patch_shape)


def _montage(patch: ImagePatch, phi):
    glyph = hog_glyph(phi, scale=max(4, patch.height // phi.grid[0]))
    gh, gw = glyph.height, glyph.width
    c = patch.channels
    canvas = np.zeros((max(patch.height, gh), patch.width + gw + 4, c))
    canvas[: patch.height, : patch.width] = patch.data
    canvas[:gh, patch.width + 4 :] = glyph.data if c == 1 else np.repeat(glyph.data, 3, axis=2)
    return ImagePatch(canvas)


@main.command(name="eval")
@click.argument("protocol", type=click.Choice(["ncc", "diversity", "recursion", "ratio"]))
@click.option("--corpus", "corpus_dir", required=True, type=click.Path(exists=True))
@click.option("--methods", default="pairdict,ridge", show_default=True)
@click.option("--dict", "dict_path", type=click.Path(exists=True), default=None)
@click.option("--gaussian", "gauss_path", type=click.Path(exists=True), default=None)
@click.option("--elda-db", "elda_dir", type=click.Path(exists=True), default=None)
@click.option("--n", default=2, type=int, show_default=True)
@click.option("--gamma", default=1.0, type=float, show_default=True)
@click.option("--nudge-gamma", default=0.05, type=float, show_default=True)
@click.option("--depth", default=3, type=int, show_default=True)
@click.option("--bins", default=20, type=int, show_default=True)
@click.option("--count", default=None, type=int, help="limit evaluated patches")
@click.option("--topk", default=20, type=int, show_default=True)
@click.option("--seed", default=0, type=int, show_default=True)
@click.option("--jobs", default=None, type=int, help="defaults to FEATINVERT_JOBS")
@click.option("--out", required=True, type=click.Path())
def eval_cmd(protocol, corpus_dir, methods, dict_path, gauss_path, elda_dir,
             n, gamma, nudge_gamma, depth, bins, count, topk, seed, jobs, out):
    """Run a quantitative evaluation protocol over a corpus."""
    started = time.time()
    jobs = jobs or _default_jobs()
    extractor = HogExtractor()
    method_names = [m.strip() for m in methods.split(",") if m.strip()]
    try:
        corpus = PatchCorpus.load(corpus_dir)
        if count is not None:
            corpus = PatchCorpus(patches=corpus.patches[:count],
                                 manifest=corpus.manifest[:count])
        os.makedirs(out, exist_ok=True)
        if protocol == "ncc":
            handles = _build_method_handles(
                method_names, dict_path, gauss_path, elda_dir, extractor,
                topk=topk, restarts=2, seed=seed,
            )
            report = run_ncc_benchmark(corpus, handles, extractor)
            report.to_csv(os.path.join(out, "ncc_per_patch.csv"))
            report.to_json(os.path.join(out, "ncc_summary.json"))
            for name, mean in sorted(report.means.items()):
                click.echo(f"{name}: mean NCC {mean:.4f}")
        elif protocol in ("diversity", "ratio"):
            dictionary = _require(dict_path, "--dict")
            dictionary = PairedDictionary.load(dictionary)
            records = _diversity_records(
                corpus, dictionary, extractor, method_names, n, gamma,
                nudge_gamma, seed,
            )
            if protocol == "diversity":
                all_recs = [r for recs in records.values() for r in recs]
                edges = feature_distance_bins(all_recs, bins)
                for name, recs in records.items():
                    curve = diversity_curve(recs, edges=edges)
                    _write_curve_csv(os.path.join(out, f"diversity_{name}.csv"), curve)
                    click.echo(f"{name}: {len(curve)} populated bins")
            else:
                for name, recs in records.items():
                    density, redges, iedges = ratio_density(recs, bins, bins)
                    _write_density(os.path.join(out, f"ratio_{name}"), density,
                                   redges, iedges)
                    click.echo(f"{name}: density written")
        else:  # recursion
            dictionary = PairedDictionary.load(_require(dict_path, "--dict"))
            rows = []
            for i, patch in enumerate(corpus.patches):
                for step, score in recursion_test(patch, dictionary, extractor, depth):
                    rows.append((i, step, score))
            with open(os.path.join(out, "recursion.csv"), "w") as fh:
                fh.write("patch,iteration,ncc\n")
                for i, step, score in rows:
                    fh.write(f"{i},{step},{score:.6f}\n")
            click.echo(f"recursion chains for {len(corpus)} patches")
    except FeatInvertError as exc:
        raise click.ClickException(str(exc))
    _write_manifest(
        out, f"eval {protocol}",
        {
            "corpus": corpus_dir, "methods": methods, "dict": dict_path,
            "gaussian": gauss_path, "elda_db": elda_dir, "n": n,
            "gamma": gamma, "nudge_gamma": nudge_gamma, "depth": depth,
            "bins": bins, "count": count, "topk": topk, "seed": seed,
        },
        {"corpus": corpus_dir, "dict": dict_path, "gaussian": gauss_path}, started,
    )


def _require(value, flag):
    if value is None:
        raise click.UsageError(f"{flag} is required for this protocol")
    return value


def _build_method_handles(names, dict_path, gauss_path, elda_dir, extractor,
                          topk, restarts, seed):
    handles = {}
    for name in names:
        if name == "pairdict":
            dictionary = PairedDictionary.load(_require(dict_path, "--dict"))
            handles[name] = lambda phi, d=dictionary: invert_single(phi, d)
        elif name == "ridge":
            model = StationaryGaussianModel.load(_require(gauss_path, "--gaussian"))
            handles[name] = lambda phi, m=model: ridge_invert(phi, m)
        elif name == "elda":
            db = EldaDatabase.load(_require(elda_dir, "--elda-db"))
            handles[name] = lambda phi, db=db, k=topk: elda_invert(phi, db, topk=k)
        elif name == "direct":
            model = StationaryGaussianModel.load(_require(gauss_path, "--gaussian"))
            cache = {}

            def _direct(phi, m=model, cache=cache):
                grid = (phi.grid[0], phi.grid[1])
                if grid not in cache:
                    cache[grid] = build_eigen_basis(m, grid)
                return direct_invert(phi, cache[grid], extractor,
                                     restarts=restarts, seed=seed)

            handles[name] = _direct
        else:
            raise click.UsageError(f"unknown NCC method {name!r}")
    return handles


def _diversity_records(corpus, dictionary, extractor, names, n, gamma,
                       nudge_gamma, seed):
    out = {}
    for name in names:
        recs = []
        for i, patch in enumerate(corpus.patches):
            phi = extractor(patch)
            if name in ("color", "edge", "identity"):
                aff = build_affinity(name, dictionary.patch_shape)
                inv = invert_multiple(phi, dictionary, N=n, gamma=gamma,
                                      affinity=aff, extractor=extractor)
            elif name == "nudged":
                scale = nudge_gamma * float(np.linalg.norm(
                    dictionary.standardize_feature(phi.values)))
                inv = nudged_invert(phi, dictionary, N=n, gamma=scale,
                                    seed=seed + i, extractor=extractor)
            elif name == "subset":
                inv = subset_invert(phi, dictionary, N=n, extractor=extractor)
            else:
                raise click.UsageError(f"unknown diversity method {name!r}")
            if len(inv) >= 2:
                recs.append(diversity_record(inv, phi, extractor, name))
        out[name] = recs
    return out


def _write_curve_csv(path, curve):
    with open(path, "w") as fh:
        fh.write("bin_lo,bin_hi,median_image_distance\n")
        for lo, hi, med in curve:
            fh.write(f"{lo:.6f},{hi:.6f},{med:.6f}\n")


def _write_density(prefix, density, redges, iedges):
    with open(prefix + ".json", "w") as fh:
        json.dump(
            {
                "ratio_edges": [float(e) for e in redges],
                "image_edges": [float(e) for e in iedges],
            },
            fh, indent=1, sort_keys=True,
        )
    # PGM heat image, max-normalized
    arr = density / density.max() if density.max() > 0 else density
    save_image(ImagePatch(arr[:, :, None]), prefix + ".pgm")


@main.command()
@click.option("--image", type=click.Path(exists=True), default=None)
@click.option("--descriptor", type=click.Path(exists=True), default=None)
@click.option("--scale", default=16, type=int, show_default=True)
@click.option("--out", required=True, type=click.Path())
def glyph(image, descriptor, scale, out):
    """Render the black-and-white HOG glyph for an image or descriptor."""
    started = time.time()
    try:
        phi, _ = _descriptor_from_args(image, descriptor)
        save_image(hog_glyph(phi, scale=scale), out)
    except FeatInvertError as exc:
        raise click.ClickException(str(exc))
    _write_manifest(
        os.path.dirname(os.path.abspath(out)) or ".", "glyph",
        {"image": image, "descriptor": descriptor, "scale": scale, "out": out},
        {"image": image, "descriptor": descriptor}, started,
    )


@main.command()
@click.argument("manifest_path", type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
def replay(manifest_path, out):
    """Re-run a command from its run manifest into a fresh output directory."""
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    command = manifest["command"].split()
    params = manifest["params"]
    # invert records its method as a --method option, not an argument
    args = [command[0]] if command[0] == "invert" else list(command)
    for key, val in params.items():
        if val is None or key in ("out", "config"):
            continue
        if isinstance(val, bool):
            if key == "gray":
                args.append("--gray" if val else "--rgb")
            else:
                flag = key.replace("_", "-")
                args.append(f"--{flag}" if val else f"--no-{flag}")
            continue
        args.extend(["--" + key.replace("_", "-"), str(val)])
    if command[0] in ("train", "glyph"):
        # these write a single file; keep its basename under the new dir
        os.makedirs(out, exist_ok=True)
        args.extend(["--out", os.path.join(out, os.path.basename(params["out"]))])
    else:
        args.extend(["--out", out])
    main.main(args=args, standalone_mode=False)
    click.echo(f"replayed {manifest['command']} into {out}")


if __name__ == "__main__":
    main()
