"""CSV and JSON emission for traces, flows and reports."""

from __future__ import annotations

import io
import json
from pathlib import Path

from nodkit import __version__
from nodkit.ode_flow import FlowTrace
from nodkit.solvers import SolverTrace

TRACE_COLUMNS = ("k", "residual", "dist_sq", "psi", "psi_ratio", "contraction_ok")


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    return format(float(x), ".17g")


def trace_csv(trace: SolverTrace, config_json: str) -> str:
    out = io.StringIO()
    meta = trace.meta
    out.write(f"# nodkit {__version__}\n")
    out.write(f"# instance={meta['instance']} method={meta['method']}\n")
    out.write(f"# eta={fmt(meta['eta'])} mu={fmt(meta['mu'])} seed={meta['seed']}\n")
    if meta.get("self_certified"):
        out.write("# z_star=self-certified\n")
    out.write(f"# config={config_json}\n")
    out.write(",".join(TRACE_COLUMNS) + "\n")
    for r in trace.records:
        out.write(",".join(fmt(getattr(r, c)) for c in TRACE_COLUMNS) + "\n")
    out.write(f"# stop_reason={meta['stop_reason']} iterations={meta['iterations']}\n")
    return out.getvalue()


def flow_csv(flow: FlowTrace, config_json: str, meta: dict) -> str:
    out = io.StringIO()
    d = flow.z.shape[1]
    out.write(f"# nodkit {__version__}\n")
    out.write(f"# instance={meta['instance']} mu={fmt(meta['mu'])} dt={fmt(meta['dt'])}\n")
    out.write(f"# config={config_json}\n")
    header = ["t"] + [f"z{i}" for i in range(d)] + [f"v{i}" for i in range(d)] + ["psi"]
    out.write(",".join(header) + "\n")
    for t, z, v, p in zip(flow.t, flow.z, flow.v, flow.psi):
        row = [t, *z, *v, p]
        out.write(",".join(fmt(float(x)) for x in row) + "\n")
    return out.getvalue()


def write_text(path, text: str) -> None:
    if path in (None, "-"):
        print(text, end="")
        return
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    # fixed newline so output bytes do not depend on the platform
    with open(p, "w", newline="\n") as fh:
        fh.write(text)


def write_json(path, obj) -> None:
    write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def read_trace_csv(text: str) -> tuple[dict, list[dict]]:
    """Parse a trace CSV back into header comments and typed rows."""
    header, rows, columns = {}, [], None
    for line in text.splitlines():
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("config="):
                header["config"] = json.loads(body[len("config="):])
            else:
                for part in body.split():
                    if "=" in part:
                        k, v = part.split("=", 1)
                        header[k] = v
            continue
        if columns is None:
            columns = line.split(",")
            continue
        vals = line.split(",")
        row = {}
        for c, v in zip(columns, vals):
            if v == "":
                row[c] = None
            elif c == "k":
                row[c] = int(v)
            elif c == "contraction_ok":
                row[c] = v == "true"
            else:
                row[c] = float(v)
        rows.append(row)
    return header, rows
