"""Timelines of counterexample paths: one row per thread, one span per operation."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional
from xml.sax.saxutils import escape

from .register_models import CRIT, EW, ER, FR, FW, NONCRIT, OW, SR, SW, Action


@dataclass
class Span:
    name: str                 # w1, r2, ... numbered per kind in invocation order
    thread: int
    register: str
    kind: str                 # "read" or "write"
    value: Optional[int]      # written value, or the value a read returned
    inv: int                  # step index of the invocation
    resp: Optional[int]       # step index of the response, None if still running
    marks: list = field(default_factory=list)      # steps of order/execute actions
    overlaps: list = field(default_factory=list)   # names of overlapping writes by other threads

    def end(self, length: int) -> int:
        return length if self.resp is None else self.resp

    def describe(self) -> str:
        if self.kind == "write":
            what = f"{self.register} := {self.value}"
        else:
            got = "?" if self.value is None else self.value
            what = f"{self.register} -> {got}"
        end = "..." if self.resp is None else str(self.resp)
        text = f"{self.name:>4}  t{self.thread}  {what:<16} steps {self.inv}-{end}"
        if self.overlaps:
            text += "  overlaps " + ", ".join(self.overlaps)
        return text


@dataclass
class Timeline:
    n_threads: int
    length: int
    spans: list
    events: list              # (step, thread, kind) for crit/noncrit and semaphore actions
    loop_start: Optional[int] = None

    def spans_on(self, register: str, kind: Optional[str] = None) -> list:
        return [s for s in self.spans if s.register == register and (kind is None or s.kind == kind)]

    def to_text(self) -> str:
        if self.length == 0:
            return ""
        rows = []
        ruler = "".join(str(k % 10) for k in range(self.length))
        rows.append("     " + ruler)
        for t in range(self.n_threads):
            cells = [" "] * self.length
            for s in self.spans:
                if s.thread != t:
                    continue
                end = s.end(self.length)
                for k in range(s.inv, min(end + 1, self.length)):
                    cells[k] = "="
                cells[s.inv] = "["
                if s.resp is not None:
                    cells[s.resp] = "]"
                for m in s.marks:
                    cells[m] = "|"
            for step, th, kind in self.events:
                if th == t:
                    cells[step] = {CRIT: "C", NONCRIT: "N"}.get(kind, "s")
            rows.append(f"t{t:<3} " + "".join(cells).rstrip())
        if self.loop_start is not None:
            rows.append("     " + " " * self.loop_start + "^ cycle from here")
        rows.append("")
        rows += [s.describe() for s in self.spans]
        rows.append("legend: [ invocation, ] response, | order/execute, C crit, N noncrit, s semaphore")
        return "\n".join(rows) + "\n"

    def to_svg(self, step_px: int = 14, row_px: int = 46) -> str:
        width = 90 + step_px * max(self.length, 1)
        height = 30 + row_px * self.n_threads
        out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
               f'font-family="monospace" font-size="10">']
        x0 = 70

        def x(step):
            return x0 + step * step_px

        for t in range(self.n_threads):
            y = 20 + t * row_px
            out.append(f'<text x="4" y="{y + 18}">thread {t}</text>')
            out.append(f'<line x1="{x0}" y1="{y + 24}" x2="{width - 10}" y2="{y + 24}" stroke="#bbb"/>')
        for s in self.spans:
            y = 20 + s.thread * row_px
            end = s.end(self.length)
            colour = "#cfe3ff" if s.kind == "read" else "#ffd9b3"
            stroke = "#c00" if s.overlaps else "#333"
            w = max(step_px, x(end) - x(s.inv))
            out.append(f'<rect x="{x(s.inv)}" y="{y + 12}" width="{w}" height="20" fill="{colour}" '
                       f'stroke="{stroke}"/>')
            if s.kind == "write":
                text = f"{s.name} {s.register}:={s.value}"
            else:
                text = f"{s.name} {s.register}={'?' if s.value is None else s.value}"
            out.append(f'<text x="{x(s.inv) + 2}" y="{y + 9}">{escape(text)}</text>')
            for m in s.marks:
                out.append(f'<line x1="{x(m)}" y1="{y + 12}" x2="{x(m)}" y2="{y + 32}" '
                           f'stroke="#000" stroke-width="2"/>')
        for step, t, kind in self.events:
            y = 20 + t * row_px
            label = {CRIT: "crit", NONCRIT: "nc"}.get(kind, kind)
            out.append(f'<circle cx="{x(step)}" cy="{y + 38}" r="3" fill="{"#c00" if kind == CRIT else "#666"}"/>')
            out.append(f'<text x="{x(step) + 4}" y="{y + 42}">{label}</text>')
        if self.loop_start is not None:
            out.append(f'<line x1="{x(self.loop_start)}" y1="10" x2="{x(self.loop_start)}" '
                       f'y2="{height - 4}" stroke="#090" stroke-dasharray="4 3"/>')
        out.append("</svg>")
        return "\n".join(out) + "\n"


def _split(label) -> tuple:
    """``(register or None, Action)`` from a checker label or a plain action."""
    if isinstance(label, Action):
        return None, label
    if isinstance(label, str):
        from .checker import Label
        label = Label.parse(label)
    return label.register, label.action


def render_timeline(path, n_threads: Optional[int] = None, loop_start: Optional[int] = None) -> Timeline:
    """Build a timeline from a counterexample or a sequence of labels.

    Raises ``ValueError`` if a response has no matching invocation.
    """
    if hasattr(path, "steps"):
        loop_start = path.loop_start if loop_start is None else loop_start
        labels = path.labels
    else:
        labels = list(path)
    spans: list = []
    events: list = []
    active: dict = {}
    counts = {"read": 0, "write": 0}
    threads = set()
    for step, label in enumerate(labels):
        reg, a = _split(label)
        threads.add(a.thread)
        if a.kind in (SR, SW):
            if a.thread in active:
                raise ValueError(f"step {step}: thread {a.thread} invokes while an operation is running")
            kind = "read" if a.kind == SR else "write"
            counts[kind] += 1
            span = Span(f"{kind[0]}{counts[kind]}", a.thread, reg or "reg", kind,
                        a.value if kind == "write" else None, step, None)
            active[a.thread] = span
            spans.append(span)
        elif a.kind in (FR, FW):
            span = active.pop(a.thread, None)
            if span is None or (a.kind == FR) != (span.kind == "read") or (reg and span.register != reg):
                raise ValueError(f"step {step}: {a} does not match a running operation")
            span.resp = step
            if a.kind == FR:
                span.value = a.value
        elif a.kind in (OW, ER, EW):
            span = active.get(a.thread)
            if span is None or (reg and span.register != reg):
                raise ValueError(f"step {step}: {a} outside an operation")
            span.marks.append(step)
        else:
            events.append((step, a.thread, a.kind))
    length = len(labels)
    for s in spans:
        for w in spans:
            if w is s or w.kind != "write" or w.register != s.register or w.thread == s.thread:
                continue
            if w.inv < s.end(length) and s.inv < w.end(length):
                s.overlaps.append(w.name)
    n = n_threads if n_threads is not None else (max(threads) + 1 if threads else 0)
    return Timeline(n, length, spans, events, loop_start)
