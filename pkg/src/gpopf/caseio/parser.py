from __future__ import annotations

import logging
import math
import re
from importlib import resources
from pathlib import Path
from typing import TextIO

from gpopf.caseio.model import Branch, Bus, GenCost, Generator, NetworkCase
from gpopf.domain.errors import CaseSyntaxError, CaseValidationError

logger = logging.getLogger(__name__)

BUNDLED_CASES = ("case14", "case30")

_TABLES = ("bus", "gen", "branch", "gencost")
_MIN_COLS = {"bus": 13, "gen": 10, "branch": 11, "gencost": 4}
_BUS_TYPES = {1: "PQ", 2: "PV", 3: "slack"}

_ASSIGN = re.compile(r"^\s*mpc\.([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.*)$")
_FUNCTION = re.compile(r"^\s*function\s+\w+\s*=\s*(\w+)")


def _strip_comment(line: str) -> str:
    # '%' never appears inside the numeric tables we read
    pos = line.find("%")
    return line if pos < 0 else line[:pos]


def _number(token: str, lineno: int) -> float:
    t = token.strip()
    if t.lower() in ("inf", "+inf"):
        return math.inf
    if t.lower() == "-inf":
        return -math.inf
    try:
        return float(t)
    except ValueError:
        raise CaseSyntaxError(f"not a number: {t!r}", lineno) from None


def _scalar(rhs: str, lineno: int) -> str:
    value = rhs.strip().rstrip(";").strip()
    if not value:
        raise CaseSyntaxError("missing value", lineno)
    return value


def _scan(text: str) -> tuple[str, dict[str, str], dict[str, list[tuple[int, list[float]]]]]:
    """Split MATPOWER text into scalar assignments and numeric matrices (rows keep line numbers)."""
    name = "case"
    scalars: dict[str, str] = {}
    tables: dict[str, list[tuple[int, list[float]]]] = {}

    current: str | None = None
    current_start = 0
    in_cell = False
    rows: list[tuple[int, list[float]]] = []

    def consume(body: str, lineno: int) -> bool:
        """Feed matrix body text; returns True when the closing bracket was seen."""
        closed = "]" in body
        if closed:
            body, _, tail = body.partition("]")
            if tail.strip().strip(";").strip():
                raise CaseSyntaxError(f"unexpected text after ']': {tail.strip()!r}", lineno)
        for segment in body.split(";"):
            tokens = segment.replace(",", " ").split()
            if tokens:
                rows.append((lineno, [_number(t, lineno) for t in tokens]))
        return closed

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw)
        if not line.strip():
            continue

        if in_cell:
            in_cell = "}" not in line
            continue

        if current is not None:
            if _ASSIGN.match(line):
                raise CaseSyntaxError(f"matrix mpc.{current} opened at line {current_start} is not closed", lineno)
            if consume(line, lineno):
                tables[current] = rows
                current, rows = None, []
            continue

        m = _FUNCTION.match(line)
        if m:
            name = m.group(1)
            continue

        m = _ASSIGN.match(line)
        if not m:
            if line.strip() in ("end", "return"):
                continue
            raise CaseSyntaxError(f"unrecognized statement: {line.strip()!r}", lineno)

        key, rhs = m.group(1), m.group(2)
        if rhs.lstrip().startswith("["):
            if key in tables:
                raise CaseSyntaxError(f"mpc.{key} defined twice", lineno)
            current, current_start, rows = key, lineno, []
            if consume(rhs.lstrip()[1:], lineno):
                tables[key] = rows
                current, rows = None, []
        elif rhs.lstrip().startswith("{"):
            # cell arrays (bus_name, ...) are not used; skip to the closing brace
            in_cell = "}" not in rhs
        else:
            scalars[key] = _scalar(rhs, lineno)

    if current is not None:
        raise CaseSyntaxError(f"matrix mpc.{current} is not closed", current_start)

    return name, scalars, tables


def _row(table: str, index: int, lineno: int, values: list[float]) -> list[float]:
    if len(values) < _MIN_COLS[table]:
        raise CaseSyntaxError(
            f"mpc.{table} row {index} has {len(values)} columns, expected at least {_MIN_COLS[table]}",
            lineno,
        )
    return values


def _bus(index: int, lineno: int, v: list[float]) -> Bus:
    v = _row("bus", index, lineno, v)
    code = int(v[1])
    if code not in _BUS_TYPES:
        raise CaseValidationError(f"unsupported bus type {code} at bus {int(v[0])}", "bus", index)
    vmax, vmin = v[11], v[12]
    v0 = v[7]
    if vmin <= vmax and not vmin <= v0 <= vmax:
        clamped = min(max(v0, vmin), vmax)
        logger.warning("bus %d: initial voltage %.4f clamped to %.4f", int(v[0]), v0, clamped)
        v0 = clamped
    return Bus(
        id=int(v[0]),
        bus_type=_BUS_TYPES[code],  # type: ignore[arg-type]
        pd=v[2],
        qd=v[3],
        gs=v[4],
        bs=v[5],
        vmax=vmax,
        vmin=vmin,
        v0=v0,
        theta0=math.radians(v[8]),
        base_kv=v[9],
    )


def _gen(index: int, lineno: int, v: list[float]) -> Generator:
    v = _row("gen", index, lineno, v)
    return Generator(
        bus=int(v[0]),
        pg0=v[1],
        qg0=v[2],
        qmax=v[3],
        qmin=v[4],
        vg=v[5],
        status=v[7] > 0,
        pmax=v[8],
        pmin=v[9],
    )


def _branch(index: int, lineno: int, v: list[float]) -> Branch:
    v = _row("branch", index, lineno, v)
    return Branch(
        from_bus=int(v[0]),
        to_bus=int(v[1]),
        r=v[2],
        x=v[3],
        b=v[4],
        rate_a=v[5],
        tap=v[8] if v[8] != 0.0 else 1.0,
        shift=math.radians(v[9]),
        status=v[10] > 0,
    )


def _cost(index: int, lineno: int, v: list[float]) -> GenCost:
    v = _row("gencost", index, lineno, v)
    model = int(v[0])
    if model == 1:
        raise CaseValidationError("piecewise-linear cost model is not supported", "gencost", index)
    if model != 2:
        raise CaseValidationError(f"unknown cost model {model}", "gencost", index)
    n = int(v[3])
    coeffs = v[4 : 4 + n]
    if n < 1 or len(coeffs) != n:
        raise CaseSyntaxError(f"gencost row {index} declares {n} coefficients, found {len(coeffs)}", lineno)
    # highest order first; anything above quadratic must vanish
    high, low = coeffs[: max(n - 3, 0)], coeffs[max(n - 3, 0) :]
    if any(c != 0.0 for c in high):
        raise CaseValidationError(f"polynomial cost of degree {n - 1} is not supported", "gencost", index)
    low = [0.0] * (3 - len(low)) + list(low)
    return GenCost(c2=low[0], c1=low[1], c0=low[2], startup=v[1], shutdown=v[2])


def parse_case(text: str | TextIO) -> NetworkCase:
    """Parse MATPOWER (version 2) case text into a validated NetworkCase."""
    if not isinstance(text, str):
        text = text.read()
    name, scalars, tables = _scan(text)

    version = scalars.get("version", "'2'").strip("'\"")
    if version != "2":
        raise CaseValidationError(f"only MATPOWER case format version 2 is supported, got {version}")
    if "baseMVA" not in scalars:
        raise CaseValidationError("missing mpc.baseMVA")
    try:
        base_mva = float(scalars["baseMVA"])
    except ValueError:
        raise CaseValidationError(f"baseMVA is not a number: {scalars['baseMVA']!r}") from None
    for t in _TABLES:
        if t not in tables:
            raise CaseValidationError(f"missing mpc.{t} table")

    buses = tuple(_bus(i, ln, v) for i, (ln, v) in enumerate(tables["bus"], start=1))
    gens = tuple(_gen(i, ln, v) for i, (ln, v) in enumerate(tables["gen"], start=1))
    branches = tuple(_branch(i, ln, v) for i, (ln, v) in enumerate(tables["branch"], start=1))
    costs = tuple(_cost(i, ln, v) for i, (ln, v) in enumerate(tables["gencost"], start=1))
    if len(costs) == 2 * len(gens) and gens:
        raise CaseValidationError("reactive power cost rows are not supported", "gencost", len(gens) + 1)

    return NetworkCase(
        base_mva=base_mva,
        buses=buses,
        generators=gens,
        branches=branches,
        costs=costs,
        name=name,
    )


def resolve_case_path(value: str, base_dir: Path | None = None) -> str | Path:
    """Bundled case names pass through unchanged; other values become paths."""
    if value in BUNDLED_CASES:
        return value
    p = Path(value).expanduser()
    if not p.is_absolute() and base_dir is not None:
        p = base_dir / p
    return p.resolve()


def load_case(source: str | Path) -> NetworkCase:
    """Load a case from a file path or a bundled name ("case14", "case30")."""
    if isinstance(source, str) and source in BUNDLED_CASES:
        text = resources.files("gpopf.caseio").joinpath("data", f"{source}.m").read_text(encoding="utf-8")
        return parse_case(text)
    path = Path(source)
    if not path.is_file():
        raise FileNotFoundError(f"case file not found: {path}")
    return parse_case(path.read_text(encoding="utf-8"))
