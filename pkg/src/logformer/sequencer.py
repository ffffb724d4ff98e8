"""Window assembly: non-overlapping sliding windows or block-id sessions,
plus the chronological train/test split.

Short windows are padded with reserved pad events (template_id -1) that the
embedder maps to zero rows and the model masks out of attention; true_length
records how many positions are real.
"""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass

from .errors import DataError
from .parsing import ParsedEvent

log = logging.getLogger(__name__)

PAD_TEMPLATE_ID = -1


def pad_event(order_index: int) -> ParsedEvent:
    return ParsedEvent(PAD_TEMPLATE_ID, [], "normal", order_index)


@dataclass
class Window:
    events: list[ParsedEvent]
    true_length: int
    label: int | None
    domain_tag: str = ""


def label_window(window: Window) -> int:
    """1 iff any real event is anomalous; unlabeled events are an error."""
    for ev in window.events[:window.true_length]:
        if ev.label == "unlabeled":
            raise DataError(
                f"event at order_index {ev.order_index} is unlabeled; "
                "supervised windowing needs fully labeled events")
    return int(any(ev.label == "anomalous"
                   for ev in window.events[:window.true_length]))


def _build(chunk: list[ParsedEvent], size: int, domain_tag: str,
           require_labels: bool) -> Window:
    true_length = len(chunk)
    events = list(chunk)
    next_idx = events[-1].order_index + 1
    while len(events) < size:
        events.append(pad_event(next_idx))
        next_idx += 1
    w = Window(events, true_length, None, domain_tag)
    if require_labels:
        w.label = label_window(w)
    return w


def sliding_windows(events: list[ParsedEvent], size: int, domain_tag: str = "",
                    require_labels: bool = True) -> list[Window]:
    """Consecutive non-overlapping chunks of `size`; a short tail is kept
    and padded. Every event lands in exactly one window."""
    if size < 1:
        raise DataError(f"window size must be >= 1, got {size}")
    return [_build(events[i:i + size], size, domain_tag, require_labels)
            for i in range(0, len(events), size)]


def sessions_by_block_id(events: list[ParsedEvent], id_regex: str, size: int,
                         domain_tag: str = "", require_labels: bool = True
                         ) -> tuple[list[Window], dict]:
    """Group events by the captured parameter matching id_regex.

    Groups keep arrival order, are truncated to `size` (counted) or padded;
    events with no matching parameter are dropped (counted).
    """
    try:
        pattern = re.compile(id_regex)
    except re.error as e:
        raise DataError(f"bad id regex {id_regex!r}: {e}") from e
    groups: dict[str, list[ParsedEvent]] = {}
    dropped = 0
    for ev in events:
        key = next((p for p in ev.params if pattern.fullmatch(p)), None)
        if key is None:
            dropped += 1
            continue
        groups.setdefault(key, []).append(ev)
    truncated = 0
    windows = []
    for key, group in groups.items():  # insertion order = first occurrence
        if len(group) > size:
            truncated += 1
            group = group[:size]
        windows.append(_build(group, size, domain_tag, require_labels))
    stats = {"dropped": dropped, "truncated": truncated}
    if dropped:
        log.warning("sessions_by_block_id: %d events had no id and were dropped",
                    dropped)
    return windows, stats


def chronological_split(windows: list[Window], train_fraction: float = 0.8
                        ) -> tuple[list[Window], list[Window]]:
    """Order-preserving split at floor(train_fraction * n); no shuffling."""
    if not windows:
        raise DataError("cannot split zero windows")
    if not 0.0 < train_fraction < 1.0:
        raise DataError(f"train fraction must be in (0, 1), got {train_fraction}")
    n_train = math.floor(train_fraction * len(windows))
    if n_train == 0:
        log.warning("degenerate split: %d windows leave an empty training set",
                    len(windows))
    return windows[:n_train], windows[n_train:]
