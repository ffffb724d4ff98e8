"""Fixed-depth prefix-tree template miner.

Raw log lines are tokenized on whitespace, variable-looking tokens are
pre-masked to the wildcard by configurable regexes, and lines are routed
through a tree keyed by (token count, first `depth` tokens) into leaf groups
of templates. A line merges into the most similar template in its leaf when
similarity clears the threshold, otherwise it mints a new template. Wildcard
positions only ever grow, so template ids are stable for the life of the
parser and the distinct-template count stays bounded even when parameter
values do not.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import CorruptionError, DataError

WILDCARD = "<*>"

# Token-level masking: a token is replaced only when a pattern matches it
# entirely, so digits embedded in alphanumerics ("node12") survive.
DEFAULT_MASK_PATTERNS = (
    r"0[xX][0-9a-fA-F]+",
    r"blk_-?\d+",
    r"\d{2,}",
    r"/\S*",
)

Label = str  # "normal" | "anomalous" | "unlabeled"


@dataclass
class RawLog:
    line: str
    order_index: int
    label: Label = "unlabeled"


@dataclass
class Template:
    id: int
    tokens: list[str]
    occurrence_count: int = 0


@dataclass
class ParsedEvent:
    template_id: int
    params: list[str]
    label: Label
    order_index: int


class Masker:
    def __init__(self, patterns: Iterable[str] = DEFAULT_MASK_PATTERNS):
        try:
            self._patterns = [re.compile(p) for p in patterns]
        except re.error as e:
            raise DataError(f"bad mask pattern: {e}") from e

    def masks(self, token: str) -> bool:
        return any(p.fullmatch(token) for p in self._patterns)


def tokenize(line: str, masker: Masker | None = None) -> tuple[list[str], list[str]]:
    """Whitespace-split a line, replacing maskable tokens with the wildcard.

    Returns (tokens, captures) where captures holds the original substrings
    of masked positions, in left-to-right order.
    """
    raw_tokens = line.split()
    if not raw_tokens:
        raise DataError("cannot tokenize an all-whitespace line")
    if masker is None:
        return raw_tokens, []
    tokens: list[str] = []
    captures: list[str] = []
    for tok in raw_tokens:
        if masker.masks(tok):
            tokens.append(WILDCARD)
            captures.append(tok)
        else:
            tokens.append(tok)
    return tokens, captures


def similarity(tokens: Sequence[str], template_tokens: Sequence[str]) -> float:
    """Fraction of positions that match; a template wildcard matches anything."""
    if len(tokens) != len(template_tokens):
        raise ValueError(
            f"similarity over unequal lengths: {len(tokens)} vs {len(template_tokens)}")
    hits = sum(1 for t, p in zip(tokens, template_tokens) if p == WILDCARD or t == p)
    return hits / len(tokens)


def extract_params(tokens: Sequence[str], captures: Sequence[str],
                   template_tokens: Sequence[str]) -> list[str]:
    """Parameter values for a line under a template, left-to-right over the
    template's wildcard slots. Pre-masked positions yield their captured
    substring; merge-created wildcards yield the line's literal token."""
    cap_by_pos = {}
    k = 0
    for i, tok in enumerate(tokens):
        if tok == WILDCARD:
            cap_by_pos[i] = captures[k]
            k += 1
    params = []
    for i, tok in enumerate(template_tokens):
        if tok == WILDCARD:
            params.append(cap_by_pos.get(i, tokens[i]))
    return params


def reconstruct(event: ParsedEvent, templates) -> list[str]:
    """Template tokens with wildcards substituted by the event's params."""
    try:
        template = templates[event.template_id]
    except (KeyError, IndexError):
        raise CorruptionError(f"unknown template id {event.template_id}") from None
    n_slots = sum(1 for t in template.tokens if t == WILDCARD)
    if n_slots != len(event.params):
        raise CorruptionError(
            f"template {event.template_id} has {n_slots} slots, "
            f"event carries {len(event.params)} params")
    it = iter(event.params)
    return [next(it) if t == WILDCARD else t for t in template.tokens]


@dataclass
class _Node:
    children: dict = field(default_factory=dict)
    leaf: list = field(default_factory=list)  # template ids


class DrainParser:
    """Single-writer parser state; call parse from one logical thread."""

    def __init__(self, depth: int = 4, sim_threshold: float = 0.4,
                 max_children: int = 100,
                 mask_patterns: Iterable[str] = DEFAULT_MASK_PATTERNS):
        if depth < 1:
            raise DataError(f"depth must be >= 1, got {depth}")
        if not 0.0 < sim_threshold <= 1.0:
            raise DataError(f"sim_threshold must be in (0, 1], got {sim_threshold}")
        if max_children < 1:
            raise DataError(f"max_children must be >= 1, got {max_children}")
        self.depth = depth
        self.sim_threshold = sim_threshold
        self.max_children = max_children
        self.masker = Masker(mask_patterns)
        self.templates: list[Template] = []
        self._root: dict[int, _Node] = {}

    # -- tree routing --------------------------------------------------

    def _route(self, tokens: Sequence[str]) -> _Node:
        node = self._root.setdefault(len(tokens), _Node())
        for i in range(min(self.depth, len(tokens))):
            tok = tokens[i]
            if tok == WILDCARD or (tok not in node.children
                                   and self._full(node)):
                tok = WILDCARD
            node = node.children.setdefault(tok, _Node())
        return node

    def _full(self, node: _Node) -> bool:
        n_concrete = len(node.children) - (1 if WILDCARD in node.children else 0)
        return n_concrete >= self.max_children

    def _match_or_create(self, tokens: list[str]) -> int:
        node = self._route(tokens)
        best_id, best_sim = -1, -1.0
        for tid in node.leaf:  # creation order, so ties keep the lowest id
            s = similarity(tokens, self.templates[tid].tokens)
            if s > best_sim:
                best_id, best_sim = tid, s
        if best_id >= 0 and best_sim >= self.sim_threshold:
            tpl = self.templates[best_id]
            tpl.tokens = [a if a == b else WILDCARD
                          for a, b in zip(tpl.tokens, tokens)]
            tpl.occurrence_count += 1
            return best_id
        tid = len(self.templates)
        self.templates.append(Template(tid, list(tokens), 1))
        node.leaf.append(tid)
        return tid

    # -- public API ----------------------------------------------------

    def parse_line(self, raw: RawLog) -> ParsedEvent:
        """Parse one line, updating state. The returned event is consistent
        with the template as of this call; later merges may widen the
        template, so corpus-level round-trips should go through parse_corpus."""
        tokens, captures = tokenize(raw.line, self.masker)
        tid = self._match_or_create(tokens)
        params = extract_params(tokens, captures, self.templates[tid].tokens)
        return ParsedEvent(tid, params, raw.label, raw.order_index)

    def parse_corpus(self, raws: Iterable[RawLog]) -> list[ParsedEvent]:
        """Parse a whole corpus: one online mining pass, then a parameter
        re-extraction pass against the final templates so every event
        round-trips exactly."""
        records = []
        for raw in raws:
            tokens, captures = tokenize(raw.line, self.masker)
            tid = self._match_or_create(tokens)
            records.append((tid, tokens, captures, raw.label, raw.order_index))
        events = []
        for tid, tokens, captures, label, order_index in records:
            params = extract_params(tokens, captures, self.templates[tid].tokens)
            events.append(ParsedEvent(tid, params, label, order_index))
        return events

    def export_templates(self, path) -> None:
        """One JSONL record per template, ids dense from 0."""
        with open(path, "w", encoding="utf-8") as f:
            for tpl in self.templates:
                f.write(json.dumps({"id": tpl.id, "tokens": tpl.tokens,
                                    "occurrence_count": tpl.occurrence_count}) + "\n")


def read_templates(path) -> list[Template]:
    templates = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if not line.strip():
                continue
            rec = json.loads(line)
            templates.append(Template(rec["id"], list(rec["tokens"]),
                                      rec["occurrence_count"]))
    templates.sort(key=lambda t: t.id)
    for i, tpl in enumerate(templates):
        if tpl.id != i:
            raise CorruptionError(f"template ids not dense: expected {i}, got {tpl.id}")
    return templates
