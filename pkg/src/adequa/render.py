"""Text and SVG views of a schedule table.

The text Gantt gives one row per lane at a configurable STU-per-cell zoom;
exact numbers stay in the serialized table, the rendering rounds to cells.
Waits print as `·`, timer reserves as `?`.  A reserve deliberately overlaps
the chain it covers, so it gets its own parallel row under the lane instead
of fighting for the same cells.

The SVG renderer draws one band per lane with kind-coded fills.  A
send/receive pair shares its time span, so the members of one transfer
split their band vertically; every entry keeps its own rectangle and
<title>, which is also what the rendering tests count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .schedule import EntryKind, ScheduleTable

PALETTE = {
    EntryKind.COMPUTE: "#4878a8",
    EntryKind.SEND: "#e08830",
    EntryKind.RECEIVE: "#e8c040",
    EntryKind.WAIT: "#b8b0a8",
    EntryKind.TIMER_RESERVE: "#d05858",
}


@dataclass(frozen=True)
class RenderOptions:
    stu_per_cell: int = 1
    px_per_stu: float = 4.0
    show_synchros: bool = False

    def __post_init__(self):
        if self.stu_per_cell < 1:
            raise ValueError("stu_per_cell must be positive")
        if self.px_per_stu <= 0:
            raise ValueError("px_per_stu must be positive")


def _cells(table: ScheduleTable, per_cell: int) -> int:
    span = max(table.hyperperiod_stu, table.makespan())
    return max((span + per_cell - 1) // per_cell, 1)


def _ruler(n_cells: int, per_cell: int) -> str:
    row = [" "] * n_cells
    for c in range(0, n_cells, 10):
        mark = str(c * per_cell)
        for i, ch in enumerate(mark):
            if c + i < n_cells:
                row[c + i] = ch
    return "".join(row)


def _paint(row: list, start: int, end: int, label: str, pad: str):
    width = end - start
    text = (label[:width]).ljust(width, pad)
    for i, ch in enumerate(text):
        if row[start + i] == " ":
            row[start + i] = ch


def render_text(table: ScheduleTable, opts: RenderOptions = RenderOptions()) -> str:
    per_cell = opts.stu_per_cell
    n_cells = _cells(table, per_cell)
    name_w = max([len(lane) for lane in table.lanes] + [4])
    lines = [
        f"1 cell = {per_cell} STU; hyperperiod {table.hyperperiod_stu} STU; "
        f"wait `·`, reserved `?`",
        " " * (name_w + 1) + "|" + _ruler(n_cells, per_cell) + "|",
    ]
    for lane in table.lanes:
        row = [" "] * n_cells
        reserve_row = None
        for e in table.entries:
            if e.lane != lane:
                continue
            c0 = e.start_stu // per_cell
            c1 = min((e.end_stu + per_cell - 1) // per_cell, n_cells)
            if e.kind is EntryKind.WAIT:
                _paint(row, c0, c1, "", "·")
            elif e.kind is EntryKind.TIMER_RESERVE:
                if reserve_row is None:
                    reserve_row = [" "] * n_cells
                _paint(reserve_row, c0, c1, "", "?")
            else:
                _paint(row, c0, c1, e.block or e.id, "-")
        lines.append(f"{lane:<{name_w}} |" + "".join(row) + "|")
        if reserve_row is not None:
            lines.append(" " * (name_w + 1) + "|" + "".join(reserve_row) + "|")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# SVG

_BAND_H = 26
_GAP = 8
_TOP = 30
_CHAR_W = 8


def _esc(text: str) -> str:
    return (str(text).replace("&", "&amp;").replace("<", "&lt;")
            .replace(">", "&gt;").replace('"', "&quot;"))


def _tick_step(span_stu: int) -> int:
    step = 1
    while span_stu // step > 20:
        step *= 10
    return step


def render_svg(table: ScheduleTable, opts: RenderOptions = RenderOptions()) -> str:
    px = opts.px_per_stu
    span = max(table.hyperperiod_stu, table.makespan(), 1)
    left = _CHAR_W * max([len(lane) for lane in table.lanes] + [4]) + 16
    width = left + span * px + 20
    height = _TOP + len(table.lanes) * (_BAND_H + _GAP) + 20
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{width:g}" height="{height}" '
        f'font-family="monospace" font-size="12">',
        '<defs><marker id="arrow" viewBox="0 0 6 6" refX="6" refY="3" '
        'markerWidth="6" markerHeight="6" orient="auto">'
        '<path d="M0,0 L6,3 L0,6 z" fill="#555"/></marker></defs>',
        f'<rect x="0" y="0" width="{width:g}" height="{height}" fill="white"/>',
    ]
    lane_y = {lane: _TOP + i * (_BAND_H + _GAP) for i, lane in enumerate(table.lanes)}
    step = _tick_step(span)
    for t in range(0, span + 1, step):
        x = left + t * px
        out.append(f'<line x1="{x:g}" y1="{_TOP - 6}" x2="{x:g}" '
                   f'y2="{height - 14}" stroke="#ddd"/>')
        out.append(f'<text x="{x:g}" y="{_TOP - 10}" fill="#555">{t}</text>')
    for lane, y in lane_y.items():
        out.append(f'<text x="4" y="{y + _BAND_H - 8}" fill="#222">{_esc(lane)}</text>')
        out.append(f'<line x1="{left}" y1="{y + _BAND_H}" x2="{left + span * px:g}" '
                   f'y2="{y + _BAND_H}" stroke="#bbb"/>')
    groups = {}
    for e in table.entries:
        groups.setdefault((e.lane, e.id), []).append(e)
    rect_pos = {}
    for (lane, eid), group in groups.items():
        y0 = lane_y[lane]
        slot_h = _BAND_H / len(group)
        group = sorted(group, key=lambda e: (list(EntryKind).index(e.kind),
                                             e.block or ""))
        for i, e in enumerate(group):
            x = left + e.start_stu * px
            w = e.duration_stu * px
            y = y0 + i * slot_h
            title = (f"{e.id} {e.kind.value} block={e.block or '-'} "
                     f"start={e.start_stu} duration={e.duration_stu}")
            opacity = ' fill-opacity="0.5"' if e.kind is EntryKind.TIMER_RESERVE else ""
            out.append(
                f'<rect x="{x:g}" y="{y:g}" width="{w:g}" height="{slot_h:g}" '
                f'fill="{PALETTE[e.kind]}" stroke="#333"{opacity}>'
                f'<title>{_esc(title)}</title></rect>')
            if e.kind in (EntryKind.COMPUTE, EntryKind.SEND) and e.block:
                label = e.block[:max(int(w // _CHAR_W), 0)]
                if label:
                    out.append(f'<text x="{x + 2:g}" y="{y0 + _BAND_H - 8}" '
                               f'fill="white">{_esc(label)}</text>')
            if e.id not in rect_pos or e.kind is EntryKind.COMPUTE:
                rect_pos[e.id] = (x, x + w, y0 + _BAND_H / 2)
    if opts.show_synchros:
        for s in table.synchros:
            if s.from_id not in rect_pos or s.to_id not in rect_pos:
                continue
            _, x1, y1 = rect_pos[s.from_id]
            x2, _, y2 = rect_pos[s.to_id]
            dash = ' stroke-dasharray="4 3"' if s.scope == "inter" else ""
            out.append(f'<line x1="{x1:g}" y1="{y1:g}" x2="{x2:g}" y2="{y2:g}" '
                       f'stroke="#555"{dash} marker-end="url(#arrow)"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
