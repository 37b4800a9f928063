"""Trajectory files, flat exports and JSON reports.

A trajectory file is plain text::

    #PVTRAJ 1
    #HEADER {"geometry": ..., "segments": [...], "events": [...], "meta": {...}}
    segment,t,index,re,im
    0,0.0,0,-1.0,0.0
    ...

Floats are written with ``repr``, which round-trips binary64 exactly.
Velocities are not stored; readers recompute model velocities.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from .dynamics import Burst, EventTrajectory, Merge, Trajectory

MAGIC = "#PVTRAJ"
SCHEMA_VERSION = 1
COLUMNS = ("segment", "t", "index", "re", "im")


class TrajectoryFormatError(ValueError):
    """Malformed or unsupported trajectory file."""


def to_jsonable(obj):
    """Recursively convert numpy scalars and arrays, complex numbers and dataclass-like objects."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        return value if np.isfinite(value) else repr(value)
    if obj is None or isinstance(obj, (str, int, bool)):
        return obj
    if hasattr(obj, "as_dict"):
        return to_jsonable(obj.as_dict())
    return repr(obj)


def write_json(data, path) -> None:
    Path(path).write_text(json.dumps(to_jsonable(data), indent=2) + "\n")


def event_to_dict(ev) -> dict:
    if isinstance(ev, Burst):
        return {"type": "burst", "t": ev.t, "parent_index": ev.parent_index,
                "parent_intensity": ev.parent_intensity,
                "children_intensities": list(ev.children_intensities),
                "position": [ev.position.real, ev.position.imag],
                "children_indices": list(ev.children_indices)}
    return {"type": "merge", "t": ev.t, "group_indices": list(ev.group_indices),
            "group_intensities": list(ev.group_intensities),
            "survivor_intensity": ev.survivor_intensity,
            "position": [ev.position.real, ev.position.imag],
            "survivor_index": ev.survivor_index}


def event_from_dict(d: dict):
    pos = complex(d["position"][0], d["position"][1])
    if d["type"] == "burst":
        return Burst(float(d["t"]), int(d["parent_index"]), float(d["parent_intensity"]),
                     tuple(float(x) for x in d["children_intensities"]), pos,
                     tuple(int(k) for k in d["children_indices"]))
    if d["type"] == "merge":
        return Merge(float(d["t"]), tuple(int(k) for k in d["group_indices"]),
                     tuple(float(x) for x in d["group_intensities"]),
                     float(d["survivor_intensity"]), pos, int(d["survivor_index"]))
    raise TrajectoryFormatError(f"unknown event type {d['type']!r}")


def _header(traj: EventTrajectory, extra: dict | None) -> dict:
    geometry = traj.segments[0].geometry
    forced = any(seg.field is not None and not seg.field.is_zero for seg in traj.segments)
    head = {
        "schema": SCHEMA_VERSION,
        "geometry": geometry,
        "external_field": forced,
        "segments": [{"intensities": seg.intensities.tolist(), "nodes": int(seg.times.size)}
                     for seg in traj.segments],
        "events": [event_to_dict(ev) for ev in traj.events],
        "meta": traj.meta,
    }
    if extra:
        head.update(extra)
    return to_jsonable(head)


def dumps_trajectory(traj: EventTrajectory, extra_header: dict | None = None) -> str:
    out = io.StringIO()
    out.write(f"{MAGIC} {SCHEMA_VERSION}\n")
    out.write("#HEADER " + json.dumps(_header(traj, extra_header)) + "\n")
    out.write(",".join(COLUMNS) + "\n")
    for k, seg in enumerate(traj.segments):
        for t, row in zip(seg.times, seg.positions):
            for j, z in enumerate(row):
                out.write(f"{k},{float(t)!r},{j},{float(z.real)!r},{float(z.imag)!r}\n")
    return out.getvalue()


def write_trajectory(traj: EventTrajectory, path, extra_header: dict | None = None) -> None:
    Path(path).write_text(dumps_trajectory(traj, extra_header))


def loads_trajectory(text: str) -> tuple[EventTrajectory, dict]:
    """Parse a trajectory file; returns the trajectory and its header."""
    lines = text.splitlines()
    if len(lines) < 3 or not lines[0].startswith(MAGIC):
        raise TrajectoryFormatError("missing #PVTRAJ magic line")
    version = int(lines[0].split()[1])
    if version != SCHEMA_VERSION:
        raise TrajectoryFormatError(f"unsupported schema version {version}")
    if not lines[1].startswith("#HEADER "):
        raise TrajectoryFormatError("missing #HEADER line")
    head = json.loads(lines[1][len("#HEADER "):])
    if tuple(lines[2].split(",")) != COLUMNS:
        raise TrajectoryFormatError(f"expected columns {','.join(COLUMNS)}")
    specs = head["segments"]
    data = np.loadtxt(io.StringIO("\n".join(lines[3:])), delimiter=",", ndmin=2)
    segments = []
    for k, spec in enumerate(specs):
        xi = np.asarray(spec["intensities"], dtype=float)
        rows = data[data[:, 0] == k]
        n = xi.size
        if rows.shape[0] != spec["nodes"] * n:
            raise TrajectoryFormatError(f"segment {k}: expected {spec['nodes'] * n} rows, got {rows.shape[0]}")
        rows = rows.reshape(spec["nodes"], n, 5)
        if np.any(rows[:, :, 2] != np.arange(n)[None, :]):
            raise TrajectoryFormatError(f"segment {k}: vortex indices out of order")
        times = rows[:, 0, 1]
        positions = rows[:, :, 3] + 1j * rows[:, :, 4]
        segments.append(Trajectory(times, positions, xi, None, None, None, head["geometry"]))
    events = [event_from_dict(d) for d in head["events"]]
    return EventTrajectory(segments, events, head.get("meta", {})), head


def read_trajectory(path) -> tuple[EventTrajectory, dict]:
    return loads_trajectory(Path(path).read_text())


def export_table(traj: EventTrajectory) -> str:
    """CSV with one row per node and vortex: segment, t, index, intensity, x, y."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["segment", "t", "index", "intensity", "x", "y"])
    for k, seg in enumerate(traj.segments):
        for t, row in zip(seg.times, seg.positions):
            for j, z in enumerate(row):
                writer.writerow([k, repr(float(t)), j, repr(float(seg.intensities[j])),
                                 repr(float(z.real)), repr(float(z.imag))])
    return out.getvalue()


def read_table(text: str) -> list[dict]:
    """Segments of an exported table as dicts with times, intensities and positions."""
    reader = csv.DictReader(io.StringIO(text))
    rows = list(reader)
    out = []
    for k in sorted({int(r["segment"]) for r in rows}):
        seg = [r for r in rows if int(r["segment"]) == k]
        n = max(int(r["index"]) for r in seg) + 1
        m = len(seg) // n
        times = np.array([float(r["t"]) for r in seg[::n]])
        xi = np.array([float(r["intensity"]) for r in seg[:n]])
        pos = np.array([complex(float(r["x"]), float(r["y"])) for r in seg]).reshape(m, n)
        out.append({"times": times, "intensities": xi, "positions": pos})
    return out


def export_plotdata(traj: EventTrajectory) -> dict:
    """Column-oriented arrays per segment (x, y per vortex) plus events and energy."""
    segs = []
    for seg in traj.segments:
        segs.append({
            "t": seg.times.tolist(),
            "intensities": seg.intensities.tolist(),
            "x": seg.positions.real.T.tolist(),
            "y": seg.positions.imag.T.tolist(),
            "energy": np.atleast_1d(seg.hamiltonian()).tolist() if seg.n > 1 else [0.0] * seg.times.size,
        })
    return to_jsonable({"schema": SCHEMA_VERSION, "geometry": traj.segments[0].geometry,
                        "segments": segs, "events": [event_to_dict(ev) for ev in traj.events]})


def import_plotdata(data: dict) -> EventTrajectory:
    segments = []
    for s in data["segments"]:
        pos = (np.asarray(s["x"], dtype=float) + 1j * np.asarray(s["y"], dtype=float)).T
        segments.append(Trajectory(np.asarray(s["t"], dtype=float), pos,
                                   np.asarray(s["intensities"], dtype=float), None, None, None,
                                   data["geometry"]))
    return EventTrajectory(segments, [event_from_dict(d) for d in data["events"]], {})
