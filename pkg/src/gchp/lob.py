"""Order-book file ingestion and mid-price event extraction.

Two raw layouts are supported, both delimiter-separated text:

* ``levels-10`` - one row per book update: a timestamp followed by
  ``depth`` groups of (bid price, bid size, ask price, ask size), best
  levels first.  Group order is configurable for variant layouts.
* ``lobster`` - an order-book file paired with a message file; row i of
  the book file is the state after message i, whose first column is the
  timestamp.  Book columns: ask price, ask size, bid price, bid size,
  repeated per level.

Malformed rows (wrong arity, unparseable numbers, crossed or unsorted
books) are counted and skipped; the parse fails only when the rejected
fraction exceeds the configured cap.  The canonical interchange format
produced here and consumed by every downstream command is a two-column
(timestamp, mid) file.
"""

from __future__ import annotations

import os
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .errors import RejectRatioExceeded, UnknownFormat
from .states import PriceMoveSeries

__all__ = [
    "FormatSpec",
    "LobUpdate",
    "MidSeries",
    "Session",
    "RejectionReport",
    "LobFileParser",
    "parse_lob_file",
    "extract_mid_events",
    "split_sessions",
    "moves_from_mids",
    "write_canonical",
    "read_canonical",
]

_GROUP_FIELDS = ("bid_price", "bid_size", "ask_price", "ask_size")


@dataclass(frozen=True)
class FormatSpec:
    """Declared layout of a raw input file."""

    kind: str = "levels-10"
    delimiter: str = ","
    depth: int = 10
    skip_header: bool = False
    group_order: tuple[str, ...] = _GROUP_FIELDS
    message_path: str | None = None  # lobster only; derived from the book path if unset
    max_reject_ratio: float = 0.01

    def __post_init__(self):
        if self.kind not in ("levels-10", "lobster"):
            raise UnknownFormat(f"unknown format kind {self.kind!r}")
        if sorted(self.group_order) != sorted(_GROUP_FIELDS):
            raise UnknownFormat(f"group_order must permute {_GROUP_FIELDS}")
        if not (1 <= self.depth <= 10):
            raise UnknownFormat(f"depth must be in 1..10, got {self.depth}")


@dataclass(frozen=True)
class LobUpdate:
    timestamp: float
    bid_price: np.ndarray
    bid_size: np.ndarray
    ask_price: np.ndarray
    ask_size: np.ndarray

    @property
    def mid(self) -> float:
        return (self.bid_price[0] + self.ask_price[0]) / 2.0


@dataclass(frozen=True)
class MidSeries:
    """Change-compressed (timestamp, mid) points for one session."""

    times: np.ndarray
    mids: np.ndarray
    session_id: str = ""

    def __post_init__(self):
        times = np.atleast_1d(np.asarray(self.times, dtype=np.float64)).copy()
        mids = np.atleast_1d(np.asarray(self.mids, dtype=np.float64)).copy()
        if times.shape != mids.shape:
            raise ValueError("times and mids must have matching shapes")
        if times.size > 1 and np.any(np.diff(times) < 0):
            raise ValueError("timestamps must be nondecreasing")
        if mids.size > 1 and np.any(np.diff(mids) == 0):
            raise ValueError("series must be change-compressed (no repeated mids)")
        times.setflags(write=False)
        mids.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "mids", mids)

    def __len__(self) -> int:
        return int(self.times.size)

    def prevailing(self, t: float) -> float:
        """Last observed mid at or before ``t`` (first mid before any data)."""
        idx = int(np.searchsorted(self.times, t, side="right")) - 1
        return float(self.mids[max(idx, 0)])


@dataclass(frozen=True)
class Session:
    session_id: str
    open: float
    close: float

    def __post_init__(self):
        if not (self.close > self.open):
            raise ValueError(f"session close must exceed open "
                             f"({self.open} .. {self.close})")


@dataclass
class RejectionReport:
    path: str
    total_rows: int = 0
    accepted: int = 0
    rejected: int = 0
    reasons: Counter = field(default_factory=Counter)

    @property
    def reject_ratio(self) -> float:
        return self.rejected / self.total_rows if self.total_rows else 0.0

    def to_dict(self) -> dict:
        return {
            "path": self.path,
            "total_rows": self.total_rows,
            "accepted": self.accepted,
            "rejected": self.rejected,
            "reject_ratio": self.reject_ratio,
            "reasons": dict(sorted(self.reasons.items())),
        }


def _check_book(bid_p, bid_s, ask_p, ask_s) -> str | None:
    if not (ask_p[0] > bid_p[0]):
        return "crossed book"
    if bid_p.size > 1 and np.any(np.diff(bid_p) >= 0):
        return "bid levels not strictly decreasing"
    if ask_p.size > 1 and np.any(np.diff(ask_p) <= 0):
        return "ask levels not strictly increasing"
    if np.any(bid_s < 0) or np.any(ask_s < 0):
        return "negative size"
    return None


class LobFileParser:
    """Single-pass streaming parser; ``report`` is complete once iterated.

    Iteration raises RejectRatioExceeded at end of stream when the
    rejected fraction is over ``format.max_reject_ratio``.
    """

    def __init__(self, path: str, fmt: FormatSpec):
        self.path = path
        self.fmt = fmt
        self.report = RejectionReport(path=path)

    def __iter__(self):
        if self.fmt.kind == "levels-10":
            yield from self._iter_levels()
        else:
            yield from self._iter_lobster()
        if self.report.reject_ratio > self.fmt.max_reject_ratio:
            raise RejectRatioExceeded(
                f"{self.path}: rejected {self.report.rejected}/"
                f"{self.report.total_rows} rows "
                f"(cap {self.fmt.max_reject_ratio:.2%})"
            )

    def _reject(self, reason: str):
        self.report.rejected += 1
        self.report.reasons[reason] += 1

    def _rows(self, path: str):
        with open(path) as handle:
            first = True
            for line in handle:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if first and self.fmt.skip_header:
                    first = False
                    continue
                first = False
                yield line.split(self.fmt.delimiter)

    def _iter_levels(self):
        depth = self.fmt.depth
        want = 1 + 4 * depth
        offsets = {name: i for i, name in enumerate(self.fmt.group_order)}
        for fields in self._rows(self.path):
            self.report.total_rows += 1
            if len(fields) != want:
                self._reject(f"expected {want} columns")
                continue
            try:
                values = np.array([float(x) for x in fields], dtype=np.float64)
            except ValueError:
                self._reject("non-numeric field")
                continue
            body = values[1:].reshape(depth, 4)
            bid_p = body[:, offsets["bid_price"]]
            bid_s = body[:, offsets["bid_size"]]
            ask_p = body[:, offsets["ask_price"]]
            ask_s = body[:, offsets["ask_size"]]
            problem = _check_book(bid_p, bid_s, ask_p, ask_s)
            if problem:
                self._reject(problem)
                continue
            self.report.accepted += 1
            yield LobUpdate(timestamp=values[0], bid_price=bid_p, bid_size=bid_s,
                            ask_price=ask_p, ask_size=ask_s)

    def _message_path(self) -> str:
        if self.fmt.message_path:
            return self.fmt.message_path
        head, tail = os.path.split(self.path)
        if "orderbook" not in tail:
            raise UnknownFormat(
                f"cannot derive the message file for {self.path!r}; "
                "set message_path explicitly"
            )
        return os.path.join(head, tail.replace("orderbook", "message"))

    def _iter_lobster(self):
        depth = self.fmt.depth
        want = 4 * depth
        for book_fields, msg_fields in zip(self._rows(self.path),
                                           self._rows(self._message_path())):
            self.report.total_rows += 1
            if len(book_fields) != want or not msg_fields:
                self._reject(f"expected {want} book columns and a message row")
                continue
            try:
                t = float(msg_fields[0])
                values = np.array([float(x) for x in book_fields], dtype=np.float64)
            except ValueError:
                self._reject("non-numeric field")
                continue
            body = values.reshape(depth, 4)
            ask_p, ask_s, bid_p, bid_s = body[:, 0], body[:, 1], body[:, 2], body[:, 3]
            problem = _check_book(bid_p, bid_s, ask_p, ask_s)
            if problem:
                self._reject(problem)
                continue
            self.report.accepted += 1
            yield LobUpdate(timestamp=t, bid_price=bid_p, bid_size=bid_s,
                            ask_price=ask_p, ask_size=ask_s)


def parse_lob_file(path: str, fmt: FormatSpec) -> LobFileParser:
    """Open a raw file for streaming; see LobFileParser."""
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    return LobFileParser(path, fmt)


def extract_mid_events(updates, tick: float,
                       session_id: str = "") -> tuple[MidSeries, PriceMoveSeries]:
    """Compress a stream of book updates into mid-change events.

    A point is stored only when the mid differs from the previous stored
    mid; the move series holds the consecutive differences.  Duplicate
    change timestamps are nudged up by one float step to keep the event
    clock strictly increasing.
    """
    times: list[float] = []
    mids: list[float] = []
    for update in updates:
        mid = update.mid
        if mids and mid == mids[-1]:
            continue
        t = float(update.timestamp)
        if times and t <= times[-1]:
            t = float(np.nextafter(times[-1], np.inf))
        times.append(t)
        mids.append(mid)
    mid_series = MidSeries(times=np.array(times), mids=np.array(mids),
                           session_id=session_id)
    moves = PriceMoveSeries(times=np.array(times[1:]),
                            deltas=np.diff(np.array(mids)), tick=tick)
    return mid_series, moves


def moves_from_mids(mid: MidSeries, tick: float) -> PriceMoveSeries:
    """Consecutive mid differences of an already change-compressed series."""
    return PriceMoveSeries(times=mid.times[1:], deltas=np.diff(mid.mids), tick=tick)


def split_sessions(mid: MidSeries, calendar: list[Session]) -> list[MidSeries]:
    """Cut a multi-session series at session boundaries.

    Each output is session-relative (t=0 at open) and starts from the first
    change inside its session, so overnight gaps never become moves.
    """
    out = []
    for session in calendar:
        mask = (mid.times >= session.open) & (mid.times <= session.close)
        out.append(MidSeries(times=mid.times[mask] - session.open,
                             mids=mid.mids[mask],
                             session_id=session.session_id))
    return out


def write_canonical(path: str, mid: MidSeries, meta: dict | None = None,
                    delimiter: str = ",") -> None:
    """Write the (timestamp, mid) interchange file atomically."""
    tmp = f"{path}.tmp"
    with open(tmp, "w") as handle:
        for key, value in (meta or {}).items():
            handle.write(f"# {key}={value}\n")
        handle.write(f"# session_id={mid.session_id}\n")
        for t, m in zip(mid.times, mid.mids):
            handle.write(f"{float(t)!r}{delimiter}{float(m)!r}\n")
    os.replace(tmp, path)


def read_canonical(path: str, delimiter: str = ",") -> tuple[MidSeries, dict]:
    """Read a canonical file back; returns the series and its # metadata."""
    meta: dict[str, str] = {}
    times: list[float] = []
    mids: list[float] = []
    with open(path) as handle:
        for line in handle:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                meta[key.strip()] = value.strip()
                continue
            t, m = line.split(delimiter)
            times.append(float(t))
            mids.append(float(m))
    series = MidSeries(times=np.array(times), mids=np.array(mids),
                       session_id=meta.get("session_id", ""))
    return series, meta
