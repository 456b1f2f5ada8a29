"""Dataset evaluation: ingest, method execution, metric aggregation, reports.

Each input image is normalized to the base resolution, every requested
method produces one image per magnification level, and every metric scores
every (image, method, level) cell.  Failed cells receive the worst value for
their metric and are counted, never dropped, so two runs over the same
inputs emit byte-identical CSV.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .backends import Backend, NearestBackend, make_backend
from .chain import ChainTranscript, ConfigError, ZoomConfig, make_initial_state, run_chain, run_direct
from .geometry import BICUBIC, resample
from .metrics import MetricEngine, MetricReport, higher_is_better
from .niqe import NiqeModel, fit_niqe_model, load_model
from .prompts import NullPrompter, Prompter, TagPrompter, VlmPrompter
from .wire import MetricClient, PromptClient, load_png

METHODS = ("nn_interp", "direct_sr", "coz_null", "coz_dape_tags", "coz_vlm")
IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")

ENV_ENDPOINTS = {
    "sr": "COZ_SR_URL",
    "prompt": "COZ_PROMPT_URL",
    "metric": "COZ_METRIC_URL",
    "critic": "COZ_CRITIC_URL",
}


class HarnessError(ConfigError):
    """Run-level configuration problem; maps to exit code 1."""


@dataclass(frozen=True)
class RunSpec:
    input_dir: str
    output_dir: str
    zoom: ZoomConfig
    methods: tuple[str, ...]
    metrics: tuple[str, ...]
    endpoints: dict[str, str] = field(default_factory=dict)
    seed: int = 0
    tags_file: Optional[str] = None
    niqe_model_path: Optional[str] = None
    parallelism: int = 1
    save_images: bool = False
    timeout_s: float = 30.0

    def validate(self) -> None:
        self.zoom.validate()
        if not self.methods:
            raise HarnessError("at least one method required")
        if not self.metrics:
            raise HarnessError("at least one metric required")
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise HarnessError(f"unknown methods {unknown}; choose from {METHODS}")
        if "coz_vlm" in self.methods and not self.endpoints.get("prompt"):
            raise HarnessError("coz_vlm requires a prompt endpoint")
        if "coz_dape_tags" in self.methods and not self.tags_file:
            raise HarnessError("coz_dape_tags requires a tags file")
        needs_sr_backend = [m for m in self.methods if m != "nn_interp"]
        if needs_sr_backend and self.zoom.backend_id == "remote" and not self.endpoints.get("sr"):
            raise HarnessError("remote backend requires an SR endpoint")
        remote_metrics = [m for m in self.metrics if m.lower() != "niqe"]
        if remote_metrics and not self.endpoints.get("metric"):
            raise HarnessError(f"metrics {remote_metrics} require a metric endpoint")
        if self.parallelism < 1:
            raise HarnessError(f"parallelism must be >= 1, got {self.parallelism}")


def apply_env_endpoints(endpoints: dict[str, str], env=None) -> dict[str, str]:
    """Environment variables override config-file endpoint URLs."""
    env = os.environ if env is None else env
    merged = dict(endpoints)
    for role, var in ENV_ENDPOINTS.items():
        if env.get(var):
            merged[role] = env[var]
    return merged


def load_runspec(path, env=None) -> RunSpec:
    path = Path(path)
    raw = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:  # python < 3.11
            import tomli as tomllib
        data = tomllib.loads(raw)
    else:
        data = json.loads(raw)
    try:
        zoom = ZoomConfig(
            scale_s=int(data.get("scale", 4)),
            recursions_n=int(data.get("recursions", 4)),
            base_resolution=int(data.get("base_resolution", 512)),
            prompt_mode=data.get("prompt_mode", "null"),
            backend_id=data.get("backend", "bicubic"),
            seed=int(data.get("seed", 0)),
        )
        spec = RunSpec(
            input_dir=data["input_dir"],
            output_dir=data["output_dir"],
            zoom=zoom,
            methods=tuple(data.get("methods", ["coz_null"])),
            metrics=tuple(data.get("metrics", ["niqe"])),
            endpoints=apply_env_endpoints(dict(data.get("endpoints", {})), env),
            seed=int(data.get("seed", 0)),
            tags_file=data.get("tags_file"),
            niqe_model_path=data.get("niqe_model"),
            parallelism=int(data.get("parallelism", 1)),
            save_images=bool(data.get("save_images", False)),
            timeout_s=float(data.get("timeout_s", 30.0)),
        )
    except KeyError as exc:
        raise HarnessError(f"config missing required field {exc}") from exc
    return spec


@dataclass
class PreparedImage:
    image_id: str
    image: np.ndarray
    flags: tuple[str, ...] = ()
    source_path: str = ""


def prepare_raster(img: np.ndarray, base_resolution: int) -> tuple[np.ndarray, tuple[str, ...]]:
    """Short side to base resolution (aspect preserved), then center crop."""
    h, w = img.shape[:2]
    if h == base_resolution and w == base_resolution:
        return img, ()
    flags = ("upscaled-ingest",) if min(h, w) < base_resolution else ()
    short, long_ = (h, w) if h <= w else (w, h)
    new_long = round(long_ * base_resolution / short)
    new_h, new_w = (base_resolution, new_long) if h <= w else (new_long, base_resolution)
    resized = resample(img, new_h, new_w, BICUBIC)
    off_h = (new_h - base_resolution) // 2
    off_w = (new_w - base_resolution) // 2
    return resized[off_h:off_h + base_resolution, off_w:off_w + base_resolution], flags


def ingest(input_dir, base_resolution: int) -> tuple[list[PreparedImage], list[str]]:
    input_dir = Path(input_dir)
    if not input_dir.is_dir():
        raise HarnessError(f"input dir {input_dir} does not exist")
    paths = sorted(
        p for p in input_dir.iterdir()
        if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES
    )
    prepared, skipped = [], []
    for p in paths:
        try:
            raw = load_png(p)
        except Exception as exc:
            skipped.append(f"{p.name}: {exc}")
            continue
        image, flags = prepare_raster(raw, base_resolution)
        prepared.append(
            PreparedImage(image_id=p.stem, image=image, flags=flags, source_path=str(p))
        )
    if not prepared:
        raise HarnessError(f"no decodable images in {input_dir} (skipped: {skipped})")
    return prepared, skipped


def load_tags(path) -> dict[str, list[str]]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, dict):
        raise HarnessError("tags file must map image_id to a tag list")
    return {k: list(v) for k, v in data.items()}


def _backend_for(method: str, spec: RunSpec) -> Backend:
    if method == "nn_interp":
        return NearestBackend()
    return make_backend(
        spec.zoom.backend_id, sr_url=spec.endpoints.get("sr"), timeout_s=spec.timeout_s
    )


def _prompter_for(method: str, spec: RunSpec, tags: Optional[list[str]]) -> Prompter:
    if method == "coz_vlm":
        return VlmPrompter(
            PromptClient(spec.endpoints["prompt"], timeout_s=spec.timeout_s), seed=spec.seed
        )
    if method == "coz_dape_tags":
        return TagPrompter(tags or [])
    return NullPrompter()


@dataclass
class MethodResult:
    images: dict[int, Optional[np.ndarray]]  # scale index -> raster (None = failed)
    errors: list[str] = field(default_factory=list)
    transcript: Optional[ChainTranscript] = None


def run_method(
    method: str, prepared: PreparedImage, spec: RunSpec, tags: Optional[list[str]] = None
) -> MethodResult:
    """All magnification levels for one (image, method) pair."""
    backend = _backend_for(method, spec)
    zoom = spec.zoom
    x0 = make_initial_state(prepared.image, zoom.base_resolution)
    images: dict[int, Optional[np.ndarray]] = {i: None for i in range(1, zoom.recursions_n + 1)}
    errors: list[str] = []
    if method == "direct_sr":
        for i in range(1, zoom.recursions_n + 1):
            factor = zoom.scale_s**i
            try:
                state = run_direct(
                    x0, factor, backend, zoom.scale_s, seed=spec.seed, image_id=prepared.image_id
                )
                images[i] = state.image
            except Exception as exc:
                errors.append(f"direct x{factor}: {exc}")
        return MethodResult(images=images, errors=errors)
    prompter = _prompter_for(method, spec, tags)
    transcript = run_chain(x0, zoom, backend, prompter, image_id=prepared.image_id)
    for state in transcript.states[1:]:
        images[state.index] = state.image
    for err in transcript.errors:
        errors.append(f"step {err.step} {err.stage}: {err.message}")
    return MethodResult(images=images, errors=errors, transcript=transcript)


@dataclass
class ScaleRow:
    scale_factor: int
    method: str
    metric: str
    mean: float
    failures: int
    count: int


@dataclass
class EvalResult:
    rows: list[ScaleRow]
    per_image: dict  # image_id -> method -> scale index -> MetricReport
    skipped: list[str]
    had_failures: bool


def _resolve_niqe_model(spec: RunSpec, prepared: list[PreparedImage]) -> Optional[NiqeModel]:
    if not any(m.lower() == "niqe" for m in spec.metrics):
        return None
    if spec.niqe_model_path:
        return load_model(spec.niqe_model_path)
    # no model on disk: fit one from the ingested inputs themselves, which is
    # deterministic for a fixed corpus (the ingested images are the pristine
    # references at base resolution)
    return fit_niqe_model([p.image for p in prepared], min_images=1)


def run_protocol(spec: RunSpec) -> EvalResult:
    spec.validate()
    prepared, skipped = ingest(spec.input_dir, spec.zoom.base_resolution)
    tags_by_id: dict[str, list[str]] = {}
    if "coz_dape_tags" in spec.methods:
        tags_by_id = load_tags(spec.tags_file)
        missing = [p.image_id for p in prepared if p.image_id not in tags_by_id]
        if missing:
            raise HarnessError(f"tags file missing entries for {missing}")
    niqe_model = _resolve_niqe_model(spec, prepared)
    engine = MetricEngine(
        niqe_model=niqe_model,
        client=MetricClient(spec.endpoints["metric"], timeout_s=spec.timeout_s)
        if spec.endpoints.get("metric")
        else None,
    )
    out_dir = Path(spec.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    def process(prep: PreparedImage) -> dict:
        results = {}
        for method in spec.methods:
            try:
                mres = run_method(method, prep, spec, tags_by_id.get(prep.image_id))
            except Exception as exc:
                mres = MethodResult(
                    images={i: None for i in range(1, spec.zoom.recursions_n + 1)},
                    errors=[f"method failed: {exc}"],
                )
            reports = {}
            for i, image in mres.images.items():
                rep = engine.report(prep.image_id, image, list(spec.metrics))
                if image is None:
                    for metric in spec.metrics:
                        rep.failures.setdefault(metric, "; ".join(mres.errors) or "missing")
                reports[i] = rep
            results[method] = {"reports": reports, "result": mres}
        return results

    per_image: dict[str, dict] = {}
    if spec.parallelism > 1:
        with ThreadPoolExecutor(max_workers=spec.parallelism) as pool:
            for prep, res in zip(prepared, pool.map(process, prepared)):
                per_image[prep.image_id] = res
    else:
        for prep in prepared:
            per_image[prep.image_id] = process(prep)

    for image_id in sorted(per_image):
        for method, bundle in per_image[image_id].items():
            transcript = bundle["result"].transcript
            if transcript is not None:
                tdir = out_dir / "transcripts"
                tdir.mkdir(exist_ok=True)
                transcript.save_json(tdir / f"{image_id}_{method}.json")
                if spec.save_images:
                    transcript.save_images(out_dir / "images")

    reports_only = {
        image_id: {m: b["reports"] for m, b in bundles.items()}
        for image_id, bundles in per_image.items()
    }
    rows = aggregate(reports_only, spec)
    had_failures = any(r.failures > 0 for r in rows) or bool(skipped)
    write_csv(rows, out_dir / "report.csv")
    write_markdown(rows, out_dir / "report.md")
    write_per_image_json(reports_only, out_dir / "per_image.json")
    return EvalResult(rows=rows, per_image=reports_only, skipped=skipped,
                      had_failures=had_failures)


def aggregate(per_image: dict, spec: RunSpec) -> list[ScaleRow]:
    """Per (scale, method, metric) means over all images, failures counted."""
    rows = []
    image_ids = sorted(per_image)
    for i in range(1, spec.zoom.recursions_n + 1):
        factor = spec.zoom.scale_s**i
        for method in spec.methods:
            for metric in spec.metrics:
                total, failures = 0.0, 0
                for image_id in image_ids:
                    rep: MetricReport = per_image[image_id][method][i]
                    total += rep.scores[metric]
                    if metric in rep.failures:
                        failures += 1
                rows.append(
                    ScaleRow(
                        scale_factor=factor,
                        method=method,
                        metric=metric,
                        mean=total / len(image_ids),
                        failures=failures,
                        count=len(image_ids),
                    )
                )
    return rows


def write_csv(rows: list[ScaleRow], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["scale,method,metric,mean,failures,count"]
    for r in rows:
        lines.append(f"{r.scale_factor},{r.method},{r.metric},{r.mean:.6f},{r.failures},{r.count}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def _rank_marks(values: dict[str, float], metric: str) -> dict[str, str]:
    """Bold the best method, italicize the second best."""
    ordered = sorted(values, key=lambda m: values[m], reverse=higher_is_better(metric))
    marks = {}
    if len(ordered) >= 1:
        marks[ordered[0]] = "**{}**"
    if len(ordered) >= 2:
        marks[ordered[1]] = "*{}*"
    return marks


def write_markdown(rows: list[ScaleRow], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    metrics = sorted({r.metric for r in rows})
    scales = sorted({r.scale_factor for r in rows})
    methods = []
    for r in rows:
        if r.method not in methods:
            methods.append(r.method)
    cell = {(r.scale_factor, r.method, r.metric): r for r in rows}
    lines = ["# Evaluation report", ""]
    for scale in scales:
        lines.append(f"## {scale}x")
        lines.append("")
        header = ["Method"] + [
            f"{m} {'↓' if not higher_is_better(m) else '↑'}" for m in metrics
        ]
        lines.append("| " + " | ".join(header) + " |")
        lines.append("|" + "---|" * len(header))
        marks_per_metric = {
            metric: _rank_marks(
                {m: cell[(scale, m, metric)].mean for m in methods if (scale, m, metric) in cell},
                metric,
            )
            for metric in metrics
        }
        for method in methods:
            cells = [method]
            for metric in metrics:
                row = cell.get((scale, method, metric))
                if row is None:
                    cells.append("")
                    continue
                text = f"{row.mean:.4f}"
                if row.failures:
                    text += f" ({row.failures} failed)"
                template = marks_per_metric[metric].get(method, "{}")
                cells.append(template.format(text))
            lines.append("| " + " | ".join(cells) + " |")
        lines.append("")
    path.write_text("\n".join(lines), encoding="utf-8")
    return path


def write_per_image_json(per_image: dict, path) -> Path:
    path = Path(path)
    serializable = {
        image_id: {
            method: {str(i): rep.to_dict() for i, rep in reports.items()}
            for method, reports in methods.items()
        }
        for image_id, methods in per_image.items()
    }
    path.write_text(
        json.dumps(serializable, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    return path
