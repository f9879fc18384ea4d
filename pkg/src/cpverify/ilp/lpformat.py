"""CPLEX LP text format: writer and a reader for the subset the writer emits."""

from __future__ import annotations

import re

from .model import IlpModel

_LINE = 78
_TERM = re.compile(r"([+-])?\s*(\d+)?\s*([A-Za-z_!\"#$%&()/,.;?@`'{}|~][A-Za-z0-9_!\"#$%&()/,.;?@`'{}|~]*)")


def _terms(coeffs: dict) -> list:
    out = []
    for v, c in coeffs.items():
        if c == 0:
            continue
        mag = abs(c)
        term = v if mag == 1 else f"{mag} {v}"
        if not out:
            out.append(term if c > 0 else f"- {term}")
        else:
            out.append(f"{'-' if c < 0 else '+'} {term}")
    return out


def _wrap(prefix: str, tokens: list) -> list:
    lines, cur = [], prefix
    for tok in tokens:
        if len(cur) + len(tok) + 1 > _LINE and cur.strip() and cur != prefix:
            lines.append(cur)
            cur = "   "
        cur = f"{cur} {tok}" if cur.strip() else f"{cur}{tok}"
    lines.append(cur)
    return lines


def export_lp(model: IlpModel) -> bytes:
    out = [f"\\ Problem: {model.name}"]
    out.append("Maximize" if model.sense == "max" else "Minimize")
    out.extend(_wrap(" obj:", _terms(model.objective)))
    out.append("Subject To")
    for con in model.constraints:
        body = _terms(con.coeffs) or ["0 " + (model.variables[0] if model.variables else "x")]
        out.extend(_wrap(f" {con.name}:", body + [f"{con.sense} {con.rhs}"]))
    if model.variables:
        out.append("Binary")
        out.extend(_wrap("", list(model.variables)))
    out.append("End")
    return ("\n".join(out) + "\n").encode()


def _parse_expr(text: str) -> dict:
    coeffs = {}
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _TERM.match(text, pos)
        if not m:
            raise ValueError(f"cannot parse LP expression near {text[pos:pos + 20]!r}")
        sign, mag, var = m.groups()
        k = int(mag) if mag else 1
        if sign == "-":
            k = -k
        coeffs[var] = coeffs.get(var, 0) + k
        pos = m.end()
        while pos < len(text) and text[pos] == " ":
            pos += 1
    return coeffs


def parse_lp(data) -> IlpModel:
    """Read a model written by ``export_lp``."""
    text = data.decode() if isinstance(data, (bytes, bytearray)) else data
    name = "model"
    section = None
    stmts = {"obj": [], "st": [], "bin": []}
    sense = "min"
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("\\"):
            m = re.match(r"\\\s*Problem:\s*(.*)", line)
            if m:
                name = m.group(1).strip()
            continue
        low = line.lower()
        if low in ("minimize", "maximize"):
            sense = "max" if low == "maximize" else "min"
            section = "obj"
            continue
        if low == "subject to":
            section = "st"
            continue
        if low in ("binary", "binaries"):
            section = "bin"
            continue
        if low == "end":
            break
        if section == "st" and raw.startswith("   ") and stmts["st"]:
            stmts["st"][-1] += " " + line
        elif section == "obj" and stmts["obj"]:
            stmts["obj"][-1] += " " + line
        elif section == "bin":
            stmts["bin"].extend(line.split())
        else:
            stmts[section].append(line)

    model = IlpModel(name=name, sense=sense)
    for v in stmts["bin"]:
        model.add_var(v)
    if stmts["obj"]:
        body = stmts["obj"][0].split(":", 1)[1]
        model.objective = _parse_expr(body)
    for stmt in stmts["st"]:
        cname, body = stmt.split(":", 1)
        m = re.match(r"(.*?)(<=|>=|=)\s*(-?\d+)\s*$", body)
        lhs, op, rhs = m.group(1), m.group(2), int(m.group(3))
        coeffs = _parse_expr(lhs)
        for v in coeffs:
            model.add_var(v)
        model.add_constraint({v: k for v, k in coeffs.items()}, op, rhs, cname.strip())
    return model
