"""Run outputs: error tables, summaries, CSV export and the replayable run log.

Floats are written with ``repr`` (shortest round-trip decimal), so a stored
run log reproduces every derived file bit for bit.
"""
import hashlib
import json
import math
import os

import numpy as np

from .metrics import absolute_error, convergence_error, relative_error
from .simulator import RunLog

RUNLOG_FORMAT = "mutualloc-runlog/1"

ERROR_COLUMNS = ("step", "time_s", "e_abs_cpdaf", "e_rel_cpdaf", "e_abs_baseline",
                 "e_rel_baseline", "e_rel_final", "n_hypotheses", "update_us")
POSE_COLUMNS = ("step", "time_s", "robot", "x", "y", "z", "yaw")
ESTIMATE_COLUMNS = ("step", "time_s", "robot", "x_cpdaf", "y_cpdaf", "z_cpdaf",
                    "yaw_cpdaf", "x_baseline", "y_baseline", "z_baseline", "yaw_baseline")


class ReplayMismatch(RuntimeError):
    """A stored run log or its derived files failed verification."""


def fmt(v):
    """Shortest exact decimal for floats; ``nan`` for missing values."""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    return repr(v)


def _jsonable(v):
    v = float(v)
    return v if math.isfinite(v) else None


def error_table(log):
    """Per-row error columns (dict of 1-D arrays)."""
    rows = log.n_rows
    out = {c: np.full(rows, np.nan) for c in ERROR_COLUMNS}
    out["step"] = np.arange(rows)
    out["time_s"] = log.time
    final = log.truth[-1]
    has_base = np.all(np.isfinite(log.baseline))
    for k in range(rows):
        out["e_abs_cpdaf"][k] = absolute_error(log.estimate[k], log.truth[k])
        out["e_rel_cpdaf"][k] = relative_error(log.estimate[k], log.truth[k])
        out["e_rel_final"][k] = convergence_error(log.estimate[k], final)
        if has_base:
            out["e_abs_baseline"][k] = absolute_error(log.baseline[k], log.truth[k])
            out["e_rel_baseline"][k] = relative_error(log.baseline[k], log.truth[k])
    out["n_hypotheses"] = log.n_hypotheses.astype(np.int64)
    out["update_us"] = log.update_us
    return out


def summarize(log, threshold=None):
    """Headline numbers of a run, with the configuration echoed."""
    cfg = log.header["config"]
    threshold = cfg.get("convergence_threshold", 0.05) if threshold is None else threshold
    err = error_table(log)
    below = np.flatnonzero(err["e_rel_cpdaf"] < threshold)
    return {
        "seed": log.header["seed"],
        "version": log.header["version"],
        "n_robots": log.header["n_robots"],
        "n_steps": log.n_rows - 1,
        "initial_e_rel": _jsonable(err["e_rel_cpdaf"][0]),
        "final_e_abs": _jsonable(err["e_abs_cpdaf"][-1]),
        "final_e_rel": _jsonable(err["e_rel_cpdaf"][-1]),
        "final_e_rel_final": _jsonable(err["e_rel_final"][-1]),
        "final_e_abs_baseline": _jsonable(err["e_abs_baseline"][-1]),
        "final_e_rel_baseline": _jsonable(err["e_rel_baseline"][-1]),
        "convergence_threshold": threshold,
        "time_to_converge_s": float(log.time[below[0]]) if below.size else None,
        "mean_hypotheses": float(np.mean(log.n_hypotheses[1:])) if log.n_rows > 1 else 0.0,
        "total_wall_time_s": log.header.get("wall_time_s"),
        "config": cfg,
    }


def dumps_summary(summary):
    return json.dumps(summary, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _csv(columns, rows, note):
    lines = ["# schema: " + ",".join(columns), "# " + note, ",".join(columns)]
    lines += [",".join(fmt(v) for v in r) for r in rows]
    return "\n".join(lines) + "\n"


def errors_csv(log):
    err = error_table(log)
    rows = zip(*(err[c] for c in ERROR_COLUMNS))
    note = ("errors in m^2 + rad^2; e_rel_final is against the final true "
            "configuration; update_us is 0 unless timing is recorded")
    return _csv(ERROR_COLUMNS, rows, note)


def truth_csv(log):
    rows = ((k, log.time[k], i, *log.truth[k, i])
            for k in range(log.n_rows) for i in range(log.truth.shape[1]))
    return _csv(POSE_COLUMNS, rows, "true poses in the common frame (m, rad)")


def estimates_csv(log):
    rows = ((k, log.time[k], i, *log.estimate[k, i], *log.baseline[k, i])
            for k in range(log.n_rows) for i in range(log.truth.shape[1]))
    return _csv(ESTIMATE_COLUMNS, rows,
                "filter and dead-reckoning estimates in the common frame (m, rad)")


def _row_records(log):
    for k in range(log.n_rows):
        yield json.dumps({
            "step": k,
            "t": float(log.time[k]),
            "truth": log.truth[k].tolist(),
            "estimate": log.estimate[k].tolist(),
            "baseline": [[_jsonable(v) for v in r] for r in log.baseline[k]],
            "n_hypotheses": int(log.n_hypotheses[k]),
            "update_us": float(log.update_us[k]),
        }, allow_nan=False)


def dumps_runlog(log):
    body = "\n".join(_row_records(log)) + "\n"
    header = dict(log.header, rows=log.n_rows,
                  checksum=hashlib.sha256(body.encode()).hexdigest())
    return json.dumps(header, sort_keys=True, allow_nan=False) + "\n" + body


def loads_runlog(text):
    """Parse a run log, verifying its checksum.

    Raises
    ------
    ReplayMismatch
        If the checksum or the row count does not match.
    """
    head, _, body = text.partition("\n")
    try:
        header = json.loads(head)
    except json.JSONDecodeError as exc:
        raise ReplayMismatch(f"unreadable run log header: {exc}") from None
    if header.get("format") != RUNLOG_FORMAT:
        raise ReplayMismatch("not a run log (format %r)" % header.get("format"))
    if hashlib.sha256(body.encode()).hexdigest() != header.get("checksum"):
        raise ReplayMismatch("checksum mismatch")
    recs = [json.loads(line) for line in body.splitlines() if line]
    if len(recs) != header.get("rows"):
        raise ReplayMismatch("row count mismatch")

    def arr(key):
        return np.array([[[np.nan if v is None else v for v in r] for r in rec[key]]
                         for rec in recs], dtype=float)

    header = {k: v for k, v in header.items() if k not in ("checksum", "rows")}
    return RunLog(header, np.array([r["t"] for r in recs], dtype=float), arr("truth"),
                  arr("estimate"), arr("baseline"),
                  np.array([r["n_hypotheses"] for r in recs], dtype=np.int64),
                  np.array([r["update_us"] for r in recs], dtype=float))


OUTPUT_FILES = {
    "errors.csv": errors_csv,
    "estimates.csv": estimates_csv,
    "truth.csv": truth_csv,
    "summary.json": lambda log: dumps_summary(summarize(log)),
    "runlog.jsonl": dumps_runlog,
}


def write_outputs(log, out_dir):
    """Write every output file of a run into ``out_dir``; returns the paths."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for name, render in OUTPUT_FILES.items():
        path = os.path.join(out_dir, name)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(render(log))
        paths.append(path)
    return paths


def replay(runlog_path):
    """Recompute the derived files of a stored run and compare them byte for
    byte with the ones stored next to it (``summary.json`` must exist; the
    CSV files are checked when present).

    Returns
    -------
    list of str
        Names of the verified files.

    Raises
    ------
    ReplayMismatch
    """
    with open(runlog_path, encoding="utf-8") as fh:
        log = loads_runlog(fh.read())
    folder = os.path.dirname(os.path.abspath(runlog_path))
    if not os.path.exists(os.path.join(folder, "summary.json")):
        raise ReplayMismatch("summary.json not found next to the run log")
    checked = []
    for name, render in OUTPUT_FILES.items():
        path = os.path.join(folder, name)
        if name == "runlog.jsonl" or not os.path.exists(path):
            continue
        with open(path, encoding="utf-8", newline="") as fh:
            stored = fh.read()
        if stored != render(log):
            raise ReplayMismatch(f"{name} differs from the recomputed version")
        checked.append(name)
    return checked
