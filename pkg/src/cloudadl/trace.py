"""Tab-separated trace rendering.

One line per event: step, kind, subject, sequence number, tokens, payload.
Empty columns hold "-". Tokens render as name#serial, sorted, joined by
commas. Two runs of the same model, scenario, and seed render to the same
bytes.
"""

from __future__ import annotations

from .kernel import Event


def render_tokens(tokens: tuple[tuple[str, int], ...]) -> str:
    if not tokens:
        return "-"
    return ",".join(f"{name}#{serial}" for name, serial in sorted(tokens))


def render_event(ev: Event) -> str:
    seq = "-" if ev.seq is None else str(ev.seq)
    return "\t".join(
        [str(ev.step), ev.kind, ev.subject, seq, render_tokens(ev.tokens), ev.payload]
    )


def render_trace(events: list[Event]) -> str:
    if not events:
        return ""
    return "\n".join(render_event(ev) for ev in events) + "\n"
