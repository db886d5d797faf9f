"""CSV ingestion and bit-stable report serialization."""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from .banlim import BandLimitedExtension, BandSpec, evaluate
from .market import CompleteTwin, PriceSeries, WeightConfig

__all__ = [
    "InputError",
    "read_prices_csv",
    "write_prices_csv",
    "format_float",
    "dumps",
    "write_rows_csv",
    "twin_to_dict",
    "twin_rows",
    "extension_from_dict",
]


class InputError(ValueError):
    """Malformed input file; the message names the offending line."""


def format_float(x: float) -> str:
    """17 significant digits; round-trips every double exactly."""
    x = float(x)
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return format(x, ".17g")


def read_prices_csv(path, rho: float = 1.0, bond_base: float = 1.0) -> PriceSeries:
    """Read a ``t,price`` CSV with contiguous ascending times ending at 0."""
    text = Path(path).read_text(encoding="utf-8")
    return parse_prices_csv(text, rho, bond_base, source=str(path))


def parse_prices_csv(text: str, rho: float = 1.0, bond_base: float = 1.0, source="<input>"):
    reader = csv.reader(io.StringIO(text))
    rows = []
    header_seen = False
    for lineno, row in enumerate(reader, start=1):
        if not row or all(not c.strip() for c in row):
            continue
        cells = [c.strip() for c in row]
        if not header_seen:
            if [c.lower() for c in cells] != ["t", "price"]:
                raise InputError(f"{source}:{lineno}: expected header 't,price', got {row!r}")
            header_seen = True
            continue
        if len(cells) != 2:
            raise InputError(f"{source}:{lineno}: expected 2 fields, got {len(cells)}")
        try:
            t = int(cells[0])
        except ValueError:
            raise InputError(f"{source}:{lineno}: time {cells[0]!r} is not an integer") from None
        try:
            p = float(cells[1])
        except ValueError:
            raise InputError(f"{source}:{lineno}: price {cells[1]!r} is not a number") from None
        if not (math.isfinite(p) and p > 0):
            raise InputError(f"{source}:{lineno}: price must be positive, got {cells[1]!r}")
        if rows and t != rows[-1][1] + 1:
            raise InputError(
                f"{source}:{lineno}: time {t} does not follow {rows[-1][1]} (need contiguous ascending)"
            )
        rows.append((lineno, t, p))
    if not header_seen:
        raise InputError(f"{source}: empty file")
    if len(rows) < 2:
        raise InputError(f"{source}: need at least two price rows")
    if rows[-1][1] != 0:
        raise InputError(f"{source}:{rows[-1][0]}: last time must be 0, got {rows[-1][1]}")
    return PriceSeries(np.array([p for _, _, p in rows]), rho, bond_base)


def prices_csv_text(prices: PriceSeries) -> str:
    lines = ["t,price"]
    lines += [f"{int(t)},{format_float(p)}" for t, p in zip(prices.times, prices.prices)]
    return "\n".join(lines) + "\n"


def write_prices_csv(prices: PriceSeries, path) -> None:
    Path(path).write_text(prices_csv_text(prices), encoding="utf-8")


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    return obj


def _emit(obj, indent: int, level: int, out: list):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None:
        out.append("null")
    elif obj is True:
        out.append("true")
    elif obj is False:
        out.append("false")
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, float):
        out.append(format_float(obj))
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=False))
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        for i, (k, v) in enumerate(obj.items()):
            out.append(f'{pad}"{k}": ')
            _emit(v, indent, level + 1, out)
            out.append(",\n" if i < len(obj) - 1 else "\n")
        out.append(end + "}")
    elif isinstance(obj, list):
        if not obj:
            out.append("[]")
            return
        # scalar lists stay on one line
        if all(not isinstance(v, (dict, list)) for v in obj):
            out.append("[")
            for i, v in enumerate(obj):
                _emit(v, indent, level, out)
                if i < len(obj) - 1:
                    out.append(", ")
            out.append("]")
            return
        out.append("[\n")
        for i, v in enumerate(obj):
            out.append(pad)
            _emit(v, indent, level + 1, out)
            out.append(",\n" if i < len(obj) - 1 else "\n")
        out.append(end + "]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    """JSON text with floats at 17 significant digits and stable key order."""
    out: list[str] = []
    _emit(_plain(obj), indent, 0, out)
    return "".join(out) + "\n"


def write_rows_csv(rows: list[dict], stream) -> None:
    if not rows:
        return
    fields = list(rows[0])
    stream.write(",".join(fields) + "\n")
    for r in rows:
        cells = []
        for f in fields:
            v = _plain(r[f])
            if isinstance(v, bool):
                cells.append("true" if v else "false")
            elif isinstance(v, float):
                cells.append(format_float(v))
            elif v is None:
                cells.append("")
            else:
                cells.append(str(v))
        stream.write(",".join(cells) + "\n")


def extension_to_dict(ext: BandLimitedExtension) -> dict:
    return {
        "omega": ext.omega,
        "regularization": ext.regularization,
        "residual": ext.residual,
        "rank": ext.rank,
        "anchors": ext.anchors,
        "coefficients": ext.coefficients,
    }


def extension_from_dict(d: dict) -> BandLimitedExtension:
    return BandLimitedExtension(
        BandSpec(float(d["omega"])),
        np.asarray(d["anchors"], dtype=np.int64),
        np.asarray(d["coefficients"], dtype=float),
        float(d.get("regularization", 0.0)),
        float(d.get("residual", 0.0)),
        int(d.get("rank", -1)),
    )


def twin_rows(twin: CompleteTwin, prices: PriceSeries) -> list[dict]:
    rows = [
        {
            "t": int(twin.tau),
            "price": float(prices.prices[0]),
            "s_eps": float(twin.s_eps[0]),
            "xi": None,
            "zeta": None,
            "a_eps": None,
            "xi_eps": None,
        }
    ]
    sd = prices.discounted()
    xi = sd[1:] / sd[:-1] - 1.0
    for i, t in enumerate(twin.times):
        rows.append(
            {
                "t": int(t),
                "price": float(prices.prices[i + 1]),
                "s_eps": float(twin.s_eps[i + 1]),
                "xi": float(xi[i]),
                "zeta": int(twin.zeta[i]),
                "a_eps": float(twin.a_eps[i]),
                "xi_eps": float(twin.xi_eps[i]),
            }
        )
    return rows


def twin_to_dict(twin: CompleteTwin, prices: PriceSeries) -> dict:
    return {
        "omega": twin.omega,
        "omega_over_pi": twin.omega / math.pi,
        "epsilon": twin.epsilon,
        "within_epsilon": twin.within_epsilon,
        "weight_M": twin.weights.M,
        "rho": twin.rho,
        "bond_base": twin.bond_base,
        "tau": twin.tau,
        "errors": {
            "combined": twin.combined_error,
            "sup_price": twin.sup_price_error,
            "sup_return": twin.sup_return_error,
            "weighted_l2": twin.weighted_l2_error,
            "ratio": twin.ratio_error,
            "weighted_tail_bound": twin.weighted_tail_bound,
        },
        "validity": {
            "all_magnitudes_in_unit_interval": twin.valid,
            "violations": [{"t": t, "a_eps": a} for t, a in twin.violations],
        },
        "search": [
            {"omega": om, "combined_error": err, "within_epsilon": ok} for om, err, ok in twin.search
        ],
        "extension": extension_to_dict(twin.extension),
        "series": twin_rows(twin, prices),
    }


class TwinRecord:
    """The parts of a serialized twin needed to price claims on it."""

    def __init__(self, d: dict):
        self.extension = extension_from_dict(d["extension"])
        self.weights = WeightConfig(float(d["weight_M"]))
        self.rho = float(d["rho"])
        self.bond_base = float(d["bond_base"])
        self.tau = int(d["tau"])
        self.valid = bool(d["validity"]["all_magnitudes_in_unit_interval"])
        self.series = {int(r["t"]): r for r in d["series"]}

    def bond(self, t: int) -> float:
        return self.bond_base * self.rho ** float(t)

    def discounted_price(self, t: int) -> float:
        if t not in self.series:
            raise ValueError(f"no twin price at t={t}; s must lie in {self.tau}..0")
        return float(self.series[t]["s_eps"]) / self.bond(t)

    def magnitude(self, t: int) -> float:
        """Recorded ``a_eps`` on the window; extrapolated from the extension beyond it."""
        row = self.series.get(t)
        if row is not None and row["a_eps"] is not None:
            return float(row["a_eps"])
        if t <= self.tau:
            raise ValueError(f"t={t} precedes the twin window")
        return float(self.weights.weight(t) * evaluate(self.extension, t))
