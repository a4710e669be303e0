"""CSV/JSON tables, gnuplot series, run manifests and JSONL episode traces."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

from .config import ScenarioConfig
from .experiments import METRICS, Summary


class ExportError(OSError):
    pass


def _prepare(path: Path) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ExportError(f"cannot create {path.parent}: {exc}") from exc
    return path


def _open(path: Path, mode: str = "w"):
    _prepare(path)
    try:
        return open(path, mode, newline="" if "b" not in mode else None)
    except OSError as exc:
        raise ExportError(f"cannot write {path}: {exc}") from exc


def _json_default(obj):
    if hasattr(obj, "tolist"):
        return obj.tolist()
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _clean(value):
    # JSON has no NaN; emit null instead
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    return value


def write_json(path: str | Path, data) -> Path:
    path = Path(path)
    with _open(path) as fh:
        json.dump(_clean(data), fh, indent=2, default=_json_default)
        fh.write("\n")
    return path


def write_csv(path: str | Path, rows: list[dict], columns: list[str] | None = None) -> Path:
    path = Path(path)
    columns = list(columns or (rows[0].keys() if rows else []))
    with _open(path) as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, quoting=csv.QUOTE_MINIMAL, lineterminator="\r\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    return path


def read_csv(path: str | Path) -> list[dict]:
    """Rows with numeric-looking fields converted back to int/float."""
    with open(path, newline="") as fh:
        return [{k: _number(v) for k, v in row.items()} for row in csv.DictReader(fh)]


def _number(text: str):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    if text in ("True", "False"):
        return text == "True"
    return text


def write_series(path: str | Path, series: list[tuple], label: str = "") -> Path:
    """Whitespace-separated ``value mean stddev`` lines, '#' header."""
    path = Path(path)
    with _open(path) as fh:
        fh.write(f"# {label or path.stem}\n# value mean stddev\n")
        for value, mean, std in series:
            fh.write(f"{value!r} {mean!r} {std!r}\n")
    return path


def export_summary(summary: Summary, out_dir: str | Path, experiment: str,
                   formats: tuple = ("csv", "json")) -> list[Path]:
    """One table per (axis, agent) named ``<experiment>_<axis>_<agent>``, plus figure series."""
    out_dir = Path(out_dir)
    written = []
    for axis, agent in summary.groups():
        stem = f"{experiment}_{axis}_{agent}"
        rows = summary.table(axis, agent)
        if "csv" in formats:
            written.append(write_csv(out_dir / f"{stem}.csv", rows))
        if "json" in formats:
            bounds = {m: summary.bounds[(axis, agent, m)] for m in METRICS}
            written.append(write_json(out_dir / f"{stem}.json", {"rows": rows, "normalization_bounds": bounds}))
        for m in METRICS:
            written.append(write_series(out_dir / "series" / f"{stem}_{m}.dat",
                                        summary.series(axis, agent, m), f"{stem} {m}"))
    return written


def export_records(records, path: str | Path) -> Path:
    return write_csv(path, [r.as_dict() for r in records])


# -- per-run artifacts -------------------------------------------------------------------

def run_stem(config: ScenarioConfig, seed: int, agent: str) -> str:
    return f"{config.digest()}_{agent}_s{seed}"


def write_run_artifacts(out_dir: str | Path, config: ScenarioConfig, seed: int, agent: str,
                        result, episodes) -> Path:
    """Network, training log, evaluation rows and the manifest tying them together."""
    runs = Path(out_dir) / "runs"
    stem = run_stem(config, seed, agent)
    manifest = {
        "scenario_id": config.digest(), "seed": seed, "agent": agent,
        "config": config.to_dict(),
        "training_episodes": 0 if result is None else config.episodes,
        "eval_episode_range": [0, len(episodes)],
        "network": None,
        "final_metrics": _mean_metrics(episodes),
    }
    if result is not None:
        net_path = runs / f"{stem}.qnet"
        _prepare(net_path)
        result.net.save(net_path)
        manifest["network"] = str(net_path)
        manifest.update(result.manifest_fields(config))
        write_csv(runs / f"{stem}_train.csv", result.log)
    else:
        manifest.update(replay=False, memory_capacity=0)
    write_csv(runs / f"{stem}_eval.csv", [_flat(m.as_dict()) for m in episodes])
    return write_json(runs / f"{stem}.json", manifest)


def _mean_metrics(episodes) -> dict:
    if not episodes:
        return {}
    keys = ("reward", "eta", "aoi", "bandwidth_efficiency", "utilization")
    return {k: sum(getattr(e, k) for e in episodes) / len(episodes) for k in keys}


def _flat(d: dict) -> dict:
    out = {}
    for k, v in d.items():
        if isinstance(v, dict):
            out.update({f"{k}_{kk}": vv for kk, vv in v.items()})
        else:
            out[k] = v
    return out


# -- traces ------------------------------------------------------------------------------

def write_trace(path: str | Path, header: dict, steps: list[dict]) -> Path:
    path = Path(path)
    with _open(path) as fh:
        fh.write(json.dumps({"kind": "header", **header}, default=_json_default) + "\n")
        for s in steps:
            fh.write(json.dumps({"kind": "step", **s}, default=_json_default) + "\n")
    return path


def read_trace(path: str | Path) -> tuple[dict, list[dict]]:
    header, steps = None, []
    with open(path) as fh:
        for n, line in enumerate(fh, 1):
            if not line.strip():
                continue
            rec = json.loads(line)
            kind = rec.pop("kind", None)
            if kind == "header":
                header = rec
            elif kind == "step":
                steps.append(rec)
            else:
                raise ValueError(f"{path}:{n}: unknown record kind {kind!r}")
    if header is None:
        raise ValueError(f"{path}: missing header record")
    return header, steps
