"""Text file formats exchanged between pipeline stages.

Numbers are written with 6 significant digits (``%.6g``) and a ``.`` decimal
separator regardless of locale. Readers raise ``FormatError`` with the file
and line number on malformed input. See ``docs/formats.md`` for examples.
"""

import csv
import io
import json
import math

import numpy as np

from .projection import Detection

H_COLUMNS = ["frame"] + [f"h{i}{j}" for i in (1, 2, 3) for j in (1, 2, 3)]
GT_COLUMNS = ["frame", "player_id", "team", "x", "y"]
SHOT_COLUMNS = ["start", "end"]
CLASS_COLUMNS = ["start", "end", "score", "label"]
REPORT_COLUMNS = ["filters", "team_constrained", "mode", "q", "d_mean", "d_median", "acc_2", "acc_3",
                  "ratio", "n_frames", "n_kept", "n_scored", "gt_visible_frames", "gt_all_frames"]


class FormatError(ValueError):
    pass


def fmt(x):
    """Locale-independent 6 significant digit rendering; ints stay ints."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".6g")


def _num(x):
    """JSON-ready number rounded to 6 significant digits."""
    return float(format(float(x), ".6g"))


def _open_text(path):
    try:
        return open(path, newline="", encoding="ascii")
    except OSError as e:
        raise FormatError(f"{path}: {e.strerror}") from e


def _read_csv(path, columns):
    with _open_text(path) as fh:
        try:
            rows = list(csv.reader(fh))
        except (csv.Error, UnicodeDecodeError) as e:
            raise FormatError(f"{path}: {e}") from e
    if not rows or rows[0] != columns:
        raise FormatError(f"{path}: expected header {','.join(columns)}")
    out = []
    for n, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(columns):
            raise FormatError(f"{path}:{n}: expected {len(columns)} fields, got {len(row)}")
        out.append((n, row))
    return out


def _write_csv(path, columns, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([v if isinstance(v, str) else fmt(v) for v in row])
    with open(path, "w", newline="", encoding="ascii") as fh:
        fh.write(buf.getvalue())


def _parse(path, n, conv, value, what):
    try:
        return conv(value)
    except (TypeError, ValueError) as e:
        raise FormatError(f"{path}:{n}: bad {what} {value!r}") from e


def _frame(path, n, value):
    f = _parse(path, n, int, value, "frame")
    if f < 0:
        raise FormatError(f"{path}:{n}: negative frame {f}")
    return f


# -- homographies --------------------------------------------------------------

def write_homographies(path, homographies):
    """``homographies`` maps frame -> 3x3 array, or None for a failed registration."""
    rows = []
    for frame in sorted(homographies):
        H = homographies[frame]
        vals = [float("nan")] * 9 if H is None else np.asarray(H, dtype=np.float64).ravel().tolist()
        rows.append([frame] + vals)
    _write_csv(path, H_COLUMNS, rows)


def read_homographies(path):
    out = {}
    for n, row in _read_csv(path, H_COLUMNS):
        frame = _frame(path, n, row[0])
        if frame in out:
            raise FormatError(f"{path}:{n}: duplicate frame {frame}")
        vals = np.array([_parse(path, n, float, v, "entry") for v in row[1:]])
        if np.all(np.isnan(vals)):
            out[frame] = None
        elif not np.all(np.isfinite(vals)):
            raise FormatError(f"{path}:{n}: non-finite homography entries")
        else:
            out[frame] = vals.reshape(3, 3)
    return out


# -- detections ---------------------------------------------------------------

def _jsonl(path):
    with _open_text(path) as fh:
        try:
            lines = fh.read().splitlines()
        except UnicodeDecodeError as e:
            raise FormatError(f"{path}: {e}") from e
    for n, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise FormatError(f"{path}:{n}: {e.msg}") from e
        if not isinstance(obj, dict):
            raise FormatError(f"{path}:{n}: expected a JSON object")
        yield n, obj


def _write_jsonl(path, objs):
    with open(path, "w", encoding="ascii") as fh:
        for o in objs:
            fh.write(json.dumps(o, separators=(",", ":")) + "\n")


def write_detections(path, detections, colors=None):
    """One JSON object per detection; ``colors`` optionally maps detection_id -> (h, s, v)."""
    objs = []
    for d in detections:
        o = {"frame": d.frame, "detection_id": d.detection_id,
             "x1": _num(d.x1), "y1": _num(d.y1), "x2": _num(d.x2), "y2": _num(d.y2),
             "confidence": None if d.confidence is None else _num(d.confidence)}
        if colors is not None and d.detection_id in colors:
            o["hsv"] = [_num(c) for c in colors[d.detection_id]]
        objs.append(o)
    _write_jsonl(path, objs)


def read_detections(path):
    """Returns ``(detections, colors)``; ``colors`` maps detection_id -> (h, s, v)."""
    dets, colors, seen = [], {}, set()
    for n, o in _jsonl(path):
        try:
            frame = _frame(path, n, o["frame"])
            box = [float(o[k]) for k in ("x1", "y1", "x2", "y2")]
        except KeyError as e:
            raise FormatError(f"{path}:{n}: missing field {e.args[0]}") from e
        except (TypeError, ValueError) as e:
            raise FormatError(f"{path}:{n}: non-numeric box") from e
        did = o.get("detection_id")
        if did is None:
            did = len(dets)
        if not isinstance(did, int) or did in seen:
            raise FormatError(f"{path}:{n}: bad or duplicate detection_id {did!r}")
        seen.add(did)
        conf = o.get("confidence")
        try:
            d = Detection(frame, *box, confidence=None if conf is None else float(conf), detection_id=did)
        except ValueError as e:
            raise FormatError(f"{path}:{n}: {e}") from e
        dets.append(d)
        if "hsv" in o:
            hsv = o["hsv"]
            if not (isinstance(hsv, list) and len(hsv) == 3):
                raise FormatError(f"{path}:{n}: hsv must be a list of three numbers")
            hsv = tuple(_parse(path, n, float, c, "hsv value") for c in hsv)
            if not all(0 <= c <= 1 for c in hsv):
                raise FormatError(f"{path}:{n}: hsv values must lie in [0, 1]")
            colors[did] = hsv
    return dets, colors


def write_colors(path, rows):
    """``rows``: iterable of ``(frame, detection_id, (h, s, v))``."""
    _write_jsonl(path, [{"frame": f, "detection_id": did, "h": _num(c[0]), "s": _num(c[1]), "v": _num(c[2])}
                        for f, did, c in rows])


def read_colors(path):
    """Precomputed colour summaries; returns detection_id -> (h, s, v)."""
    colors = {}
    for n, o in _jsonl(path):
        try:
            _frame(path, n, o["frame"])
            did = o["detection_id"]
            hsv = tuple(_parse(path, n, float, o[k], "colour value") for k in ("h", "s", "v"))
        except KeyError as e:
            raise FormatError(f"{path}:{n}: missing field {e.args[0]}") from e
        if not isinstance(did, int) or did in colors:
            raise FormatError(f"{path}:{n}: bad or duplicate detection_id {did!r}")
        if not all(0 <= c <= 1 for c in hsv):
            raise FormatError(f"{path}:{n}: h, s, v must lie in [0, 1]")
        colors[did] = hsv
    return colors


# -- positions ----------------------------------------------------------------

def write_positions(path, estimates):
    """One JSON object per frame: homography, sv flag and player positions."""
    objs = []
    for e in sorted(estimates, key=lambda e: e.frame):
        players = []
        for i, did in enumerate(e.detection_ids):
            x, y = e.positions[i]
            team = e.teams[i] if i < len(e.teams) else None
            players.append({"id": did, "x": _num(x) if np.isfinite(x) else None,
                            "y": _num(y) if np.isfinite(y) else None, "team": team})
        H = None if e.H is None else [_num(v) for v in np.asarray(e.H).ravel()]
        objs.append({"frame": e.frame, "sv": bool(e.sv_keep), "H": H, "players": players})
    _write_jsonl(path, objs)


def read_positions(path):
    from .projection import FrameEstimate

    out, seen = [], set()
    for n, o in _jsonl(path):
        try:
            frame = _frame(path, n, o["frame"])
            sv = o["sv"]
            players = o["players"]
        except KeyError as e:
            raise FormatError(f"{path}:{n}: missing field {e.args[0]}") from e
        if frame in seen:
            raise FormatError(f"{path}:{n}: duplicate frame {frame}")
        seen.add(frame)
        if not isinstance(sv, bool) or not isinstance(players, list):
            raise FormatError(f"{path}:{n}: sv must be boolean and players a list")
        H = o.get("H")
        if H is not None:
            if not (isinstance(H, list) and len(H) == 9):
                raise FormatError(f"{path}:{n}: H must hold 9 numbers")
            H = np.array([_parse(path, n, float, v, "H entry") for v in H]).reshape(3, 3)
        pos, ids, teams = [], [], []
        for p in players:
            if not isinstance(p, dict):
                raise FormatError(f"{path}:{n}: player entries must be objects")
            x, y = p.get("x"), p.get("y")
            pos.append((float("nan") if x is None else _parse(path, n, float, x, "x"),
                        float("nan") if y is None else _parse(path, n, float, y, "y")))
            ids.append(p.get("id"))
            team = p.get("team")
            if team not in (None, "A", "B", "O"):
                raise FormatError(f"{path}:{n}: bad team label {team!r}")
            teams.append(team)
        out.append(FrameEstimate(frame, H, np.array(pos, dtype=np.float64).reshape(-1, 2), ids, teams, sv))
    return out


# -- ground truth ---------------------------------------------------------------

def write_gt(path, rows):
    """``rows``: iterable of ``(frame, player_id, team, x, y)``."""
    _write_csv(path, GT_COLUMNS, [[f, pid, team, x, y] for f, pid, team, x, y in rows])


def read_gt(path):
    """Returns ``{frame: (positions (m, 2), teams, player_ids)}``."""
    acc = {}
    for n, row in _read_csv(path, GT_COLUMNS):
        frame = _frame(path, n, row[0])
        team = row[2]
        if team not in ("A", "B", "R"):
            raise FormatError(f"{path}:{n}: team must be A, B or R, got {team!r}")
        x = _parse(path, n, float, row[3], "x")
        y = _parse(path, n, float, row[4], "y")
        if not (math.isfinite(x) and math.isfinite(y)):
            raise FormatError(f"{path}:{n}: non-finite position")
        acc.setdefault(frame, []).append((row[1], team, x, y))
    return {f: (np.array([(x, y) for _, _, x, y in r], dtype=np.float64).reshape(-1, 2),
                [t for _, t, _, _ in r], [p for p, _, _, _ in r]) for f, r in acc.items()}


# -- shots ------------------------------------------------------------------------

def write_shots(path, shots):
    _write_csv(path, SHOT_COLUMNS, [[a, b] for a, b in shots])


def read_shots(path):
    out = []
    for n, row in _read_csv(path, SHOT_COLUMNS):
        a, b = _frame(path, n, row[0]), _frame(path, n, row[1])
        if b < a:
            raise FormatError(f"{path}:{n}: shot ends before it starts")
        if out and a <= out[-1][1]:
            raise FormatError(f"{path}:{n}: shots must be ordered and disjoint")
        out.append((a, b))
    return out


def write_classification(path, rows):
    """``rows``: iterable of ``(start, end, score, label)``."""
    _write_csv(path, CLASS_COLUMNS, [[a, b, s, lab] for a, b, s, lab in rows])


def read_classification(path):
    out = []
    for n, row in _read_csv(path, CLASS_COLUMNS):
        out.append((_frame(path, n, row[0]), _frame(path, n, row[1]),
                    _parse(path, n, float, row[2], "score"), row[3]))
    return out


# -- reports ---------------------------------------------------------------------

def filters_name(sv, pm):
    return "+".join(n for n, on in (("sv", sv), ("pm", pm)) if on) or "none"


def write_report(path, reports):
    rows = []
    for r in reports:
        rows.append([filters_name(r.sv, r.pm), r.team_constrained, r.mode, r.q, r.d_mean, r.d_median,
                     r.acc.get(2.0, float("nan")), r.acc.get(3.0, float("nan")), r.ratio, r.n_frames,
                     r.n_kept, r.n_scored, r.gt_visible_frames, r.gt_all_frames])
    _write_csv(path, REPORT_COLUMNS, rows)


def read_report(path):
    out = []
    for n, row in _read_csv(path, REPORT_COLUMNS):
        rec = dict(zip(REPORT_COLUMNS, row))
        for k in ("q", "d_mean", "d_median", "acc_2", "acc_3", "ratio"):
            rec[k] = _parse(path, n, float, rec[k], k)
        for k in ("n_frames", "n_kept", "n_scored", "gt_visible_frames", "gt_all_frames"):
            rec[k] = _parse(path, n, int, rec[k], k)
        rec["team_constrained"] = rec["team_constrained"] == "true"
        out.append(rec)
    return out


def write_histogram_svg(path, values, bins=30, title="per-frame error (m)"):
    """A plain SVG bar chart of per-frame errors."""
    values = np.asarray([v for v in values if np.isfinite(v)], dtype=np.float64)
    W, H, pad = 480, 240, 30
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-size="11">',
             f'<text x="{W / 2}" y="14" text-anchor="middle">{title}</text>']
    if len(values):
        hi = float(values.max()) if values.max() > 0 else 1.0
        counts, edges = np.histogram(values, bins=bins, range=(0.0, hi))
        bw = (W - 2 * pad) / bins
        top = max(int(counts.max()), 1)
        for i, c in enumerate(counts):
            h = (H - 2 * pad) * c / top
            parts.append(f'<rect x="{pad + i * bw:.1f}" y="{H - pad - h:.1f}" width="{bw - 1:.1f}" '
                         f'height="{h:.1f}" fill="#4a7ab5"/>')
        parts.append(f'<text x="{pad}" y="{H - 10}">0</text>')
        parts.append(f'<text x="{W - pad}" y="{H - 10}" text-anchor="end">{fmt(edges[-1])}</text>')
        parts.append(f'<text x="4" y="{pad + 4}">{top}</text>')
    parts.append(f'<line x1="{pad}" y1="{H - pad}" x2="{W - pad}" y2="{H - pad}" stroke="black"/>')
    parts.append("</svg>")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(parts) + "\n")
