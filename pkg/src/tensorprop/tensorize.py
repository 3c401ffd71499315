"""Chemical formulas to sparse tensor coordinates.

For a compound with ``arity`` distinct elements the tensor has order
``2 * arity``: the first ``arity`` modes index the elements (in
lexicographic symbol order) and the remaining ``arity`` modes index the
atom count of the matching element. Count ``k`` lives at index ``k - 1``.

    >>> parse_formula("AuBr5")
    Composition(parts=(('Au', 1), ('Br', 5)))

Formula grammar is a flat sequence of ``Symbol[count]`` tokens; parentheses
and hydrate dots are rejected.
"""

import csv
import enum
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError, DatasetError, ParseError
from .sptensor import COUNT, DEDUP_POLICIES, ELEMENT, IndexMap, Shape, SparseTensor, dedup

# fmt: off
ELEMENTS = (
    "H", "He",
    "Li", "Be", "B", "C", "N", "O", "F", "Ne",
    "Na", "Mg", "Al", "Si", "P", "S", "Cl", "Ar",
    "K", "Ca", "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn",
    "Ga", "Ge", "As", "Se", "Br", "Kr",
    "Rb", "Sr", "Y", "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd",
    "In", "Sn", "Sb", "Te", "I", "Xe",
    "Cs", "Ba", "La", "Ce", "Pr", "Nd", "Pm", "Sm", "Eu", "Gd", "Tb", "Dy",
    "Ho", "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W", "Re", "Os", "Ir", "Pt",
    "Au", "Hg", "Tl", "Pb", "Bi", "Po", "At", "Rn",
    "Fr", "Ra", "Ac", "Th", "Pa", "U", "Np", "Pu", "Am", "Cm", "Bk", "Cf",
    "Es", "Fm", "Md", "No", "Lr", "Rf", "Db", "Sg", "Bh", "Hs", "Mt", "Ds",
    "Rg", "Cn", "Nh", "Fl", "Mc", "Lv", "Ts", "Og",
)
# fmt: on
_ELEMENT_SET = frozenset(ELEMENTS)


@dataclass(frozen=True)
class Composition:
    """Canonical (symbol, count) pairs sorted by symbol.

    Counts are ``int`` when the formula wrote an integer and ``float``
    otherwise (e.g. ``Fe0.5``).
    """

    parts: tuple

    @property
    def symbols(self):
        return tuple(s for s, _ in self.parts)

    @property
    def counts(self):
        return tuple(c for _, c in self.parts)

    def __len__(self):
        return len(self.parts)

    def formula(self):
        """Compact string, e.g. ``AuBr5``; a count of 1 is omitted."""
        out = []
        for sym, cnt in self.parts:
            if cnt == 1:
                out.append(sym)
            elif float(cnt).is_integer():
                out.append(f"{sym}{int(cnt)}")
            else:
                out.append(f"{sym}{cnt:g}")
        return "".join(out)


def _canonical(counts):
    return Composition(tuple(sorted(counts.items())))


def parse_formula(s, validate_symbols=True):
    """Parse a flat chemical formula such as ``"Fe2O3"`` or ``"OH2"``.

    Repeated symbols are merged by summing counts. Raises
    :class:`ParseError` (with the byte offset of the problem) on an empty
    string, an illegal character, a count with no preceding element, a
    zero count, or, when ``validate_symbols`` is on, an unknown symbol.
    """
    if not isinstance(s, str) or not s:
        raise ParseError("empty formula", s, 0)
    data = s.encode("utf-8")
    counts = {}
    pos = 0
    n = len(data)
    while pos < n:
        ch = data[pos]
        if 0x41 <= ch <= 0x5A:  # A-Z
            start = pos
            pos += 1
            if pos < n and 0x61 <= data[pos] <= 0x7A:  # a-z
                pos += 1
            sym = data[start:pos].decode("ascii")
            if validate_symbols and sym not in _ELEMENT_SET:
                raise ParseError(f"unknown element symbol {sym!r}", s, start)
            num_start = pos
            while pos < n and (0x30 <= data[pos] <= 0x39 or data[pos] == 0x2E):
                pos += 1
            text = data[num_start:pos].decode("ascii")
            if text:
                count = _parse_count(text, s, num_start)
            else:
                count = 1
            counts[sym] = counts.get(sym, 0) + count
        elif 0x30 <= ch <= 0x39 or ch == 0x2E:
            raise ParseError("count without a preceding element", s, pos)
        else:
            raise ParseError(f"illegal character {chr(ch) if ch < 128 else hex(ch)!r}", s, pos)
    return _canonical(counts)


def _parse_count(text, formula, offset):
    if text.count(".") > 1 or text.startswith(".") or text.endswith("."):
        raise ParseError(f"malformed count {text!r}", formula, offset)
    value = float(text) if "." in text else int(text)
    if value <= 0:
        raise ParseError("counts must be positive", formula, offset)
    if isinstance(value, float) and value.is_integer():
        value = int(value)
    return value


class SkipReason(str, enum.Enum):
    PARSE_ERROR = "parse_error"
    WRONG_ARITY = "wrong_arity"
    COUNT_OVERFLOW = "count_overflow"
    NONINTEGER_COUNT = "noninteger_count"


@dataclass(frozen=True)
class TensorizeConfig:
    arity: int = 2
    max_count: int = 8
    count_policy: str = "skip"
    noninteger_policy: str = "skip"
    dedup_policy: str = "mean"
    validate_symbols: bool = True

    def __post_init__(self):
        if int(self.arity) < 1:
            raise ConfigError("arity must be >= 1")
        if int(self.max_count) < 1:
            raise ConfigError("max_count must be >= 1")
        if self.count_policy not in ("skip", "clip"):
            raise ConfigError(f"count_policy must be 'skip' or 'clip', got {self.count_policy!r}")
        if self.noninteger_policy not in ("skip", "round"):
            raise ConfigError(f"noninteger_policy must be 'skip' or 'round', got {self.noninteger_policy!r}")
        if self.dedup_policy not in DEDUP_POLICIES:
            raise ConfigError(f"dedup_policy must be one of {DEDUP_POLICIES}")

    @property
    def order(self):
        return 2 * self.arity

    def shape_for(self, n_symbols):
        dims = (n_symbols,) * self.arity + (self.max_count,) * self.arity
        kinds = (ELEMENT,) * self.arity + (COUNT,) * self.arity
        return Shape(dims, kinds)

    def as_dict(self):
        return dict(self.__dict__)


@dataclass
class SkipReport:
    ingested: int = 0
    encoded: int = 0
    skipped: dict = field(default_factory=lambda: {r.value: 0 for r in SkipReason})
    dedup: dict = None

    def add_skip(self, reason):
        self.skipped[SkipReason(reason).value] += 1

    @property
    def total_skipped(self):
        return sum(self.skipped.values())

    def as_dict(self):
        return {
            "ingested": self.ingested,
            "encoded": self.encoded,
            "skipped": dict(self.skipped),
            "dedup": self.dedup,
        }


def make_index_map(symbols, cfg):
    """Index map whose element modes all share one alphabet (sorted symbols)."""
    alphabet = tuple(sorted(set(symbols)))
    counts = tuple(str(k) for k in range(1, cfg.max_count + 1))
    return IndexMap((alphabet,) * cfg.arity + (counts,) * cfg.arity)


def _normalize_counts(comp, cfg):
    """Apply the count policies; returns counts or a SkipReason."""
    out = []
    for c in comp.counts:
        if not float(c).is_integer():
            if cfg.noninteger_policy == "skip":
                return SkipReason.NONINTEGER_COUNT
            c = max(1, int(round(c)))
        c = int(c)
        if c > cfg.max_count:
            if cfg.count_policy == "skip":
                return SkipReason.COUNT_OVERFLOW
            c = cfg.max_count
        out.append(c)
    return tuple(out)


def coordinate_of(comp, maps, cfg):
    """Tensor coordinate of ``comp`` or the :class:`SkipReason` it fails on.

    Elements fill the first ``arity`` modes in canonical order; the count
    modes follow in the same element order with count ``k`` at index
    ``k - 1``. A symbol absent from ``maps`` raises ``KeyError``.
    """
    if len(comp) != cfg.arity:
        return SkipReason.WRONG_ARITY
    counts = _normalize_counts(comp, cfg)
    if isinstance(counts, SkipReason):
        return counts
    elems = tuple(maps.index(n, sym) for n, sym in enumerate(comp.symbols))
    return elems + tuple(k - 1 for k in counts)


def decode_formula(coord, maps, cfg=None):
    """Inverse of :func:`coordinate_of`: coordinate to compact formula string."""
    arity = len(coord) // 2 if cfg is None else cfg.arity
    labels = maps.decode(coord)
    parts = tuple((labels[n], int(labels[arity + n])) for n in range(arity))
    return Composition(tuple(sorted(parts))).formula()


def tensorize(records, cfg=None):
    """Encode ``(formula, value)`` records as a deduplicated SparseTensor.

    Parameters
    ----------
    records : iterable of (str, float)
    cfg : TensorizeConfig, optional

    Returns
    -------
    (SparseTensor, SkipReport)
        Every input record is accounted for in the report as either
        encoded or skipped under exactly one reason.
    """
    cfg = TensorizeConfig() if cfg is None else cfg
    records = list(records)
    if not records:
        raise DatasetError("no records to tensorize")
    report = SkipReport(ingested=len(records))

    staged = []
    for formula, value in records:
        try:
            comp = parse_formula(formula, validate_symbols=cfg.validate_symbols)
        except ParseError:
            report.add_skip(SkipReason.PARSE_ERROR)
            continue
        if len(comp) != cfg.arity:
            report.add_skip(SkipReason.WRONG_ARITY)
            continue
        counts = _normalize_counts(comp, cfg)
        if isinstance(counts, SkipReason):
            report.add_skip(counts)
            continue
        staged.append((comp, float(value)))

    if not staged:
        raise DatasetError(f"all {len(records)} records were skipped: {report.skipped}")
    maps = make_index_map((s for comp, _ in staged for s in comp.symbols), cfg)
    shape = cfg.shape_for(len(maps.labels[0]))
    coords = [coordinate_of(comp, maps, cfg) for comp, _ in staged]
    values = [v for _, v in staged]
    report.encoded = len(staged)
    tensor = SparseTensor(shape, coords, values, maps)
    tensor, dreport = dedup(tensor, cfg.dedup_policy)
    report.dedup = dreport.as_dict()
    return tensor, report


def read_records(path):
    """Read a ``formula,value`` CSV (UTF-8, with header) into a list of records.

    Rows whose value is not a real number raise :class:`DatasetError`;
    unparseable formulas are passed through so that :func:`tensorize`
    can count them.
    """
    path = Path(path)
    try:
        fh = path.open(newline="", encoding="utf-8")
    except OSError as exc:
        raise DatasetError(f"cannot open dataset {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["formula", "value"]:
            raise DatasetError(f"{path}: expected header 'formula,value', got {header}")
        records = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise DatasetError(f"{path}:{lineno}: expected 2 fields, got {len(row)}")
            try:
                value = float(row[1])
            except ValueError:
                raise DatasetError(f"{path}:{lineno}: value {row[1]!r} is not a number") from None
            records.append((row[0].strip(), value))
    if not records:
        raise DatasetError(f"{path}: no records")
    return records


def tensorize_csv(path, cfg=None):
    return tensorize(read_records(path), cfg)

