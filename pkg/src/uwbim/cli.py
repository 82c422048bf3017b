"""Command-line workflows: simulate, reconstruct, pathmap, compare.

Configs are JSON; every run writes a manifest with a content hash of the
resolved configuration so results can be reproduced. Exit codes: 0 on
success, 1 on runtime/model errors, 2 on usage or config errors.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import dielectric
from .channel import AntennaModel, load_antenna_model_csv
from .errors import ConfigError, UwbimError
from .forward import ArtifactModel, Scatterer, Scene, disk_footprint, rect_footprint, simulate
from .grid import GridSpec
from .metrics import MetricRow, ideal_from_footprints, relative_difference, snr, contrast, write_metric_report
from .raypath import CylinderScene, path_count_map
from .reconstruct import (
    ReconstructionConfig,
    das,
    dmas,
    psas,
    rar,
    write_run_manifest,
)
from .signal import MultistaticDataset, ScanGeometry, load_dataset, remove_artifact, save_dataset, synthesize_pulse

ALGORITHMS = {"psas": psas, "das": das, "dmas": dmas, "rar": rar}


# ---------------------------------------------------------------------------
# config parsing


def _parse_range(text) -> np.ndarray:
    """'start:step:stop' (inclusive stop) or a JSON list of numbers."""
    if isinstance(text, (list, tuple)):
        return np.asarray(text, dtype=float)
    try:
        start, step, stop = (float(v) for v in str(text).split(":"))
    except ValueError as e:
        raise ConfigError(f"bad range {text!r}, expected start:step:stop") from e
    if step <= 0 or stop < start:
        raise ConfigError(f"bad range {text!r}")
    return np.arange(start, stop + step / 2, step)


def _medium_from_config(spec) -> dielectric.DielectricSpectrum:
    if isinstance(spec, str):
        if spec == "air":
            return dielectric.air()
        if spec == "glycerin_like":
            return dielectric.glycerin_like()
        raise ConfigError(f"unknown builtin medium {spec!r}")
    if not isinstance(spec, dict):
        raise ConfigError(f"bad medium spec {spec!r}")
    if "csv" in spec:
        return dielectric.load_spectrum_csv(spec["csv"])
    if "constant" in spec:
        c = spec["constant"]
        return dielectric.constant_medium(
            eps_r=float(c["eps_r"]),
            sigma=float(c.get("sigma", 0.0)),
            f_lo=float(c.get("f_lo_hz", 1e7)),
            f_hi=float(c.get("f_hi_hz", 1e11)),
            name=c.get("name", ""),
        )
    raise ConfigError(f"bad medium spec {spec!r}")


def _cylinder_from_config(cfg: dict) -> CylinderScene:
    try:
        cyl = cfg["cylinder"]
        return CylinderScene(
            center=tuple(cyl.get("center_m", (0.0, 0.0))),
            radius=float(cyl["radius_m"]),
            medium1=_medium_from_config(cfg.get("medium1", "air")),
            medium2=_medium_from_config(cfg["medium2"]),
        )
    except KeyError as e:
        raise ConfigError(f"missing config key: {e}") from e


def _geometry_from_config(cfg: dict) -> ScanGeometry:
    g = cfg.get("geometry", {})
    return ScanGeometry(
        tx_angles_deg=_parse_range(g.get("tx_angles_deg", "0:15:345")),
        rx_offsets_deg=_parse_range(g.get("rx_offsets_deg", "45:15:315")),
        tx_radius=float(g.get("tx_radius_m", 0.130)),
        rx_radius=float(g.get("rx_radius_m", 0.098)),
        center=tuple(g.get("center_m", (0.0, 0.0))),
    )


def _scatterers_from_config(entries) -> list[Scatterer]:
    out = []
    for e in entries or []:
        refl = e.get("reflectivity", [-1.0, 0.0])
        gamma = complex(float(refl[0]), float(refl[1]))
        if "position_m" in e:
            out.append(Scatterer(tuple(e["position_m"]), gamma))
        elif "disk" in e:
            d = e["disk"]
            pts = disk_footprint(
                tuple(d["center_m"]), float(d["radius_m"]), float(d.get("spacing_m", 1e-3))
            )
            out.extend(Scatterer(tuple(p), gamma) for p in pts)
        elif "rect" in e:
            r = e["rect"]
            pts = rect_footprint(
                tuple(r["center_m"]), tuple(r["size_m"]), float(r.get("spacing_m", 1e-3))
            )
            out.extend(Scatterer(tuple(p), gamma) for p in pts)
        else:
            raise ConfigError(f"bad scatterer entry {e!r}")
    return out


def _scene_from_config(cfg: dict) -> tuple[Scene, ScanGeometry, dict]:
    cyl = _cylinder_from_config(cfg)
    art = cfg.get("artifact", {})
    scene = Scene(
        cylinder=cyl,
        scatterers=_scatterers_from_config(cfg.get("scatterers")),
        artifact=ArtifactModel(
            coupling_amplitude=float(art.get("coupling_amplitude", 0.0)),
            interface_amplitude=float(art.get("interface_amplitude", 0.0)),
        ),
        noise_rms=float(cfg.get("noise_rms", 0.0)),
        seed=int(cfg.get("seed", 0)),
        model_jitter=float(cfg.get("model_jitter", 0.0)),
    )
    pulse_cfg = cfg.get("pulse", {})
    pulse = synthesize_pulse(
        fc=float(pulse_cfg.get("fc_hz", 4.5e9)),
        fwhm=float(pulse_cfg.get("fwhm_s", 1.46e-10)),
        dt=float(pulse_cfg.get("dt_s", 1e-11)),
        duration=float(pulse_cfg.get("duration_s", 1.2e-9)),
    )
    tb = cfg.get("timebase", {})
    sim_kwargs = {
        "fgrid": _parse_range(cfg.get("fgrid_hz", "1e9:1e7:1e10")),
        "timebase": (
            float(tb.get("t0_s", 0.0)),
            float(tb.get("dt_s", 1e-11)),
            int(tb.get("n_samples", 1000)),
        ),
        "spreading": cfg.get("spreading", "length"),
    }
    return scene, _geometry_from_config(cfg), {"pulse": pulse, **sim_kwargs}


def _grid_from_config(g: dict) -> GridSpec:
    if "origin_m" in g:
        return GridSpec(
            origin=tuple(g["origin_m"]),
            spacing=float(g["spacing_m"]),
            nx=int(g["nx"]),
            ny=int(g["ny"]),
        )
    return GridSpec.centered(
        center=tuple(g.get("center_m", (0.0, 0.0))),
        half_span=float(g["half_span_m"]),
        spacing=float(g["spacing_m"]),
    )


def _antenna_model_from_config(spec) -> AntennaModel | None:
    if spec is None:
        return None
    if isinstance(spec, dict) and "csv" in spec:
        return load_antenna_model_csv(spec["csv"])
    raise ConfigError(f"bad antenna model spec {spec!r}")


def _recon_config(cfg: dict, workers: int, freqs_override=None) -> ReconstructionConfig:
    cyl = _cylinder_from_config(cfg)
    pert = cfg.get("reference_perturbation")
    if pert:
        cyl = CylinderScene(
            center=cyl.center,
            radius=cyl.radius,
            medium1=cyl.medium1,
            medium2=dielectric.perturb_spectrum(
                cyl.medium2,
                lo=float(pert["lo"]),
                hi=float(pert["hi"]),
                sign=str(pert["sign"]),
                seed=int(pert.get("seed", 0)),
            ),
        )
    freqs = (
        _parse_range(freqs_override)
        if freqs_override
        else _parse_range(cfg.get("frequencies_hz", "2e9:5e8:7e9"))
    )
    return ReconstructionConfig(
        grid=_grid_from_config(cfg["grid"]),
        scene=cyl,
        frequencies=freqs,
        center_frequency=float(cfg.get("center_frequency_hz", 4.5e9)),
        tx_model=_antenna_model_from_config(cfg.get("tx_antenna")),
        rx_model=_antenna_model_from_config(cfg.get("rx_antenna")),
        multipath_mode=cfg.get("multipath_mode", "heff"),
        spreading=cfg.get("spreading", "length"),
        workers=workers,
    )


def _load_config(path) -> dict:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"{p}: invalid JSON ({e})") from e


def _config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()


def _prepare_out(path, force: bool) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _check_overwrite(paths, force: bool):
    if force:
        return
    for p in paths:
        if Path(p).exists():
            raise ConfigError(f"{p} exists; rerun with --force to overwrite")


# ---------------------------------------------------------------------------
# commands


def cmd_simulate(args) -> int:
    cfg = _load_config(args.config)
    if args.seed is not None:
        cfg["seed"] = args.seed
    scene, geometry, sim_kwargs = _scene_from_config(cfg)
    dataset = simulate(scene, geometry, **sim_kwargs)
    out = _prepare_out(args.out, args.force)
    save_dataset(dataset, out, force=args.force)
    run = {
        "command": "simulate",
        "config_sha256": _config_hash(cfg),
        "seed": scene.seed,
        "n_traces": int(geometry.n_tx * geometry.n_rx),
    }
    (out / "run.json").write_text(json.dumps(run, indent=2, sort_keys=True) + "\n")
    print(f"wrote {geometry.n_tx * geometry.n_rx} traces to {out}")
    return 0


def cmd_reconstruct(args) -> int:
    cfg = _load_config(args.config)
    algo = args.algo or cfg.get("algorithm", "psas")
    if algo not in ALGORITHMS:
        raise ConfigError(f"unknown algorithm {algo!r}; choose from {sorted(ALGORITHMS)}")
    dataset_dir = Path(args.dataset)
    if not dataset_dir.exists():
        raise ConfigError(f"dataset directory not found: {dataset_dir}")
    dataset = load_dataset(dataset_dir)
    if cfg.get("remove_artifact", True):
        dataset = remove_artifact(dataset)
    rcfg = _recon_config(cfg, workers=args.workers, freqs_override=args.freqs)
    out = _prepare_out(args.out, args.force)
    files = [out / f"{algo}.csv", out / f"{algo}.pgm", out / f"{algo}_run.json"]
    _check_overwrite(files, args.force)
    img = ALGORITHMS[algo](dataset, rcfg)
    img.to_csv(files[0])
    img.to_pgm(files[1])
    write_run_manifest(
        files[2],
        algo,
        rcfg,
        extras={"meta": {k: v for k, v in img.meta.items()}, "dataset": str(dataset_dir)},
    )
    print(f"wrote {files[0]} {files[1]}")
    return 0


def cmd_pathmap(args) -> int:
    cfg = _load_config(args.config)
    cyl = _cylinder_from_config(cfg)
    grid = _grid_from_config(cfg["grid"])
    source = tuple(cfg.get("source_m", (0.13, 0.0)))
    f = float(cfg.get("frequency_hz", 4.5e9))
    out = _prepare_out(args.out, args.force)
    files = [out / "pathcount.csv", out / "pathcount.pgm", out / "pathmap_run.json"]
    _check_overwrite(files, args.force)
    pmap = path_count_map(cyl, source, grid, f)
    pmap.to_csv(files[0])
    pmap.to_pgm(files[1])
    vals, cnt = np.unique(pmap.counts[pmap.mask], return_counts=True)
    run = {
        "command": "pathmap",
        "config_sha256": _config_hash(cfg),
        "source_m": list(source),
        "frequency_hz": f,
        "class_counts": {str(int(v)): int(c) for v, c in zip(vals, cnt)},
    }
    files[2].write_text(json.dumps(run, indent=2, sort_keys=True) + "\n")
    print(f"wrote {files[0]} {files[1]}")
    return 0


def cmd_compare(args) -> int:
    cfg = _load_config(args.config)
    scene_cfg = cfg["scene"] if "scene" in cfg else _load_config(cfg["scene_file"])
    scene, geometry, sim_kwargs = _scene_from_config(scene_cfg)
    dataset = remove_artifact(simulate(scene, geometry, **sim_kwargs))
    recon_cfg = dict(cfg.get("recon", {}))
    recon_cfg.setdefault("cylinder", scene_cfg["cylinder"])
    recon_cfg.setdefault("medium1", scene_cfg.get("medium1", "air"))
    recon_cfg.setdefault("medium2", scene_cfg["medium2"])
    algorithms = cfg.get("algorithms", ["psas", "rar", "dmas"])
    variants = cfg.get("variants") or [
        {"name": "matched"},
        {"name": "higher", "perturb": {"lo": 0.08, "hi": 0.12, "sign": "+", "seed": 11}},
        {"name": "lower", "perturb": {"lo": 0.08, "hi": 0.12, "sign": "-", "seed": 12}},
    ]
    scene_name = cfg.get("scene_name", "scene")

    out = _prepare_out(args.out, args.force)
    report = out / "metrics.csv"
    _check_overwrite([report], args.force)

    rows = []
    deltas: dict[str, dict[str, float]] = {}
    ideal = None
    for variant in variants:
        vcfg = dict(recon_cfg)
        if variant.get("perturb"):
            vcfg["reference_perturbation"] = variant["perturb"]
        rcfg = _recon_config(vcfg, workers=args.workers)
        if ideal is None and cfg.get("ideal_footprints"):
            ideal = ideal_from_footprints(rcfg.grid, rcfg.roi_mask(), cfg["ideal_footprints"])
        for algo in algorithms:
            img = ALGORITHMS[algo](dataset, rcfg)
            delta = relative_difference(img, ideal) if ideal is not None else float("nan")
            rows.append(
                MetricRow(
                    scene=scene_name,
                    algorithm=algo,
                    dielectric_variant=variant["name"],
                    snr_db=snr(img),
                    ctr_db=contrast(img),
                    delta=delta,
                )
            )
            deltas.setdefault(variant["name"], {})[algo] = delta
    write_metric_report(report, rows)

    ok_all = True
    if ideal is not None and "psas" in algorithms:
        for vname, by_algo in deltas.items():
            others = [a for a in by_algo if a != "psas"]
            ok = all(by_algo["psas"] < by_algo[a] for a in others)
            ok_all &= ok
            print(
                f"[{'PASS' if ok else 'FAIL'}] {scene_name}/{vname}: "
                + ", ".join(f"delta({a})={by_algo[a]:.4f}" for a in by_algo)
            )
    print(f"wrote {report}")
    return 0 if ok_all else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="uwbim",
        description="UWB radar imaging in dispersive media: simulation and reconstruction",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a multistatic dataset directory")
    p.add_argument("--config", required=True, help="scene JSON config")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--seed", type=int, default=None, help="override the scene seed")
    p.add_argument("--force", action="store_true", help="overwrite existing outputs")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("reconstruct", help="form an image from a dataset")
    p.add_argument("--config", required=True, help="reconstruction JSON config")
    p.add_argument("--dataset", required=True, help="dataset directory")
    p.add_argument("--algo", choices=sorted(ALGORITHMS), default=None)
    p.add_argument("--freqs", default=None, help="override frequencies, start:step:stop")
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("pathmap", help="stationary-path count map")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_pathmap)

    p = sub.add_parser("compare", help="algorithm x dielectric-variant metric table")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 2 if e.code not in (0, None) else 0
    try:
        return args.func(args)
    except ConfigError as e:
        print("error: " + json.dumps({"type": type(e).__name__, "message": str(e)}), file=sys.stderr)
        return 2
    except UwbimError as e:
        print("error: " + json.dumps({"type": type(e).__name__, "message": str(e)}), file=sys.stderr)
        return 1
    except (OSError, ValueError, FileExistsError) as e:
        print("error: " + json.dumps({"type": type(e).__name__, "message": str(e)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
