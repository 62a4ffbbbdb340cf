"""MATPOWER case-file reader.

Only ``baseMVA`` and the ``bus``, ``gen`` and ``branch`` matrices are read;
other ``mpc.<name> = [...]`` blocks are skipped with a warning.
"""
from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass
from pathlib import Path

from .netmodel import Branch, Bus, BusKind, Generator, Network, NetworkError


class CaseParseError(ValueError):
    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class MissingSection(CaseParseError):
    pass


class MalformedRow(CaseParseError):
    pass


class MultipleSlack(CaseParseError):
    pass


class NoSlack(CaseParseError):
    pass


@dataclass(frozen=True)
class ParseDiagnostic:
    line: int | None  # None for network-level findings with no source line
    message: str
    severity: str  # "error" | "warning"


# (minimum, maximum) column counts; max covers solved-case result columns
_COLUMNS = {"bus": (2, 17), "gen": (2, 25), "branch": (4, 21)}

_SCALAR = re.compile(r"\b\w+\s*\.\s*baseMVA\s*=\s*([^;]*);")
_MATRIX = re.compile(r"\b\w+\s*\.\s*(\w+)\s*=\s*\[(.*?)\]\s*;?", re.DOTALL)
_NUMBER = re.compile(r"[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")


def _strip_comments(text: str) -> str:
    # Keep newlines so offsets still map to source lines.
    return re.sub(r"%[^\n]*", lambda m: " " * len(m.group(0)), text)


def _line_at(text: str, offset: int) -> int:
    return text.count("\n", 0, offset) + 1


def _to_float(token: str, line: int) -> float:
    if token.lower() in ("inf", "+inf"):
        return float("inf")
    if token.lower() == "-inf":
        return float("-inf")
    if not _NUMBER.match(token):
        raise MalformedRow(f"non-numeric token {token!r}", line)
    return float(token)


def _rows(text: str, body: str, start: int, name: str) -> list[tuple[int, list[float]]]:
    lo, hi = _COLUMNS[name]
    rows = []
    offset = start
    for chunk in body.split(";"):
        tokens = chunk.replace(",", " ").split()
        if tokens:
            lead = len(chunk) - len(chunk.lstrip())
            line = _line_at(text, offset + lead)
            values = [_to_float(tok, line) for tok in tokens]
            if not lo <= len(values) <= hi:
                raise MalformedRow(
                    f"{name} row has {len(values)} columns, expected {lo} to {hi}", line
                )
            if rows and len(values) != len(rows[0][1]):
                raise MalformedRow(
                    f"{name} row has {len(values)} columns, previous rows have {len(rows[0][1])}",
                    line,
                )
            rows.append((line, values))
        offset += len(chunk) + 1
    return rows


def _col(row, k, default):
    return row[k] if len(row) > k else default


_KIND = {1: BusKind.PQ, 2: BusKind.PV, 3: BusKind.SLACK}


def parse_case(text: str, diagnostics: list | None = None) -> Network:
    """Parse MATPOWER case text into a :class:`Network`.

    Warnings (skipped blocks) are appended to ``diagnostics`` when given.
    """
    clean = _strip_comments(text)
    warnings = diagnostics if diagnostics is not None else []

    base = _SCALAR.search(clean)
    if base is None:
        raise MissingSection("missing section: baseMVA")
    base_mva = _to_float(base.group(1).strip(), _line_at(clean, base.start(1)))

    blocks = {}
    for m in _MATRIX.finditer(clean):
        name = m.group(1)
        if name in _COLUMNS:
            blocks[name] = _rows(clean, m.group(2), m.start(2), name)
        else:
            warnings.append(
                ParseDiagnostic(_line_at(clean, m.start()), f"skipped block '{name}'", "warning")
            )
    for name in ("bus", "branch"):
        if name not in blocks:
            raise MissingSection(f"missing section: {name}")

    buses = []
    slack_lines = []
    for line, row in blocks["bus"]:
        code = int(row[1])
        if code not in _KIND:
            raise MalformedRow(f"unsupported bus type {code}", line)
        if code == 3:
            slack_lines.append(line)
        buses.append(
            Bus(
                id=int(row[0]),
                kind=_KIND[code],
                p_demand=_col(row, 2, 0.0),
                q_demand=_col(row, 3, 0.0),
                shunt_g=_col(row, 4, 0.0),
                shunt_b=_col(row, 5, 0.0),
                v_init=_col(row, 7, 1.0),
                a_init=_col(row, 8, 0.0),
                v_max=_col(row, 11, 1.1),
                v_min=_col(row, 12, 0.9),
            )
        )
    if not slack_lines:
        raise NoSlack("no slack (type 3) bus")
    if len(slack_lines) > 1:
        raise MultipleSlack(f"{len(slack_lines)} slack buses", slack_lines[1])

    branches = []
    for line, row in blocks["branch"]:
        ratio = _col(row, 8, 0.0)
        branches.append(
            Branch(
                from_bus=int(row[0]),
                to_bus=int(row[1]),
                r=row[2],
                x=row[3],
                b_charge=_col(row, 4, 0.0),
                rate_a=_col(row, 5, 0.0),
                tap=ratio if ratio != 0 else 1.0,
                shift=_col(row, 9, 0.0),
                status=bool(_col(row, 10, 1.0)),
            )
        )

    gens = []
    for line, row in blocks.get("gen", []):
        gens.append(
            Generator(
                bus=int(row[0]),
                p_gen=_col(row, 1, 0.0),
                q_gen=_col(row, 2, 0.0),
                q_max=_col(row, 3, float("inf")),
                q_min=_col(row, 4, float("-inf")),
                v_set=_col(row, 5, 1.0),
                status=bool(_col(row, 7, 1.0)),
                p_max=_col(row, 8, float("inf")),
                p_min=_col(row, 9, 0.0),
            )
        )

    try:
        return Network(base_mva=base_mva, buses=buses, branches=branches, gens=gens)
    except NetworkError as exc:
        raise MalformedRow(str(exc)) from exc


def read_case(path) -> Network:
    return parse_case(Path(path).read_text(encoding="utf-8"))


def bundled_case_path(name: str) -> Path:
    """Path of a case shipped in the repository's ``cases/`` directory."""
    stem = name if name.endswith(".m") else f"{name}.m"
    return Path(__file__).resolve().parents[2] / "cases" / stem


def validate(net: Network) -> list[ParseDiagnostic]:
    """Report slack-count and connectivity problems; empty list means usable."""
    out = []
    slacks = [b.id for b in net.buses if b.kind == BusKind.SLACK]
    if len(slacks) > 1:
        out.append(ParseDiagnostic(None, f"MultipleSlack: buses {slacks}", "error"))
    elif not slacks:
        out.append(ParseDiagnostic(None, "NoSlack: no slack bus", "error"))
        return out
    for br in net.branches:
        if br.status and br.x == 0:
            out.append(
                ParseDiagnostic(
                    None, f"branch {br.from_bus}-{br.to_bus} has zero reactance", "error"
                )
            )

    adj = {b.id: [] for b in net.buses}
    for br in net.branches:
        if br.status:
            adj[br.from_bus].append(br.to_bus)
            adj[br.to_bus].append(br.from_bus)
    seen = {slacks[0]}
    queue = deque(seen)
    while queue:
        for nxt in adj[queue.popleft()]:
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    for b in net.buses:
        if b.id not in seen:
            out.append(ParseDiagnostic(None, f"bus {b.id} is isolated from the slack", "error"))
    return out
