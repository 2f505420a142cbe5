"""Prefix tree over bias-word token sequences and its decoding cursor.

The cursor tracks every node reachable by some suffix of the emitted token
stream, so one stream can simultaneously extend one bias word and begin
another.  The set of tokens that may continue a bias word at the next step
is the union of child tokens over the active nodes plus the root's children.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .tokenizer import Vocab, tokenize_word


@dataclass
class _Node:
    children: dict[int, int] = field(default_factory=dict)
    terminal: bool = False


class PrefixTree:
    """Token trie of a bias list; immutable once built via ``build_trie``."""

    def __init__(self):
        self._nodes: list[_Node] = [_Node()]
        self.word_count = 0

    @property
    def root(self) -> int:
        return 0

    def children(self, node: int) -> dict[int, int]:
        return self._nodes[node].children

    def is_terminal(self, node: int) -> bool:
        return self._nodes[node].terminal

    def _insert(self, token_ids: list[int]) -> None:
        node = 0
        for tid in token_ids:
            nxt = self._nodes[node].children.get(tid)
            if nxt is None:
                nxt = len(self._nodes)
                self._nodes[node].children[tid] = nxt
                self._nodes.append(_Node())
            node = nxt
        if not self._nodes[node].terminal:
            self._nodes[node].terminal = True
            self.word_count += 1


@dataclass(frozen=True)
class TrieCursor:
    """Active trie nodes after some emitted stream; root is implicit."""

    active_nodes: frozenset[int] = frozenset()


def build_trie(vocab: Vocab, bias_words: list[str]) -> PrefixTree:
    """Compile a bias word list into a prefix tree; duplicates collapse."""
    tree = PrefixTree()
    for word in bias_words:
        try:
            ids = tokenize_word(vocab, word.lower())
        except ValueError as exc:
            raise ValueError(f"bias word {word!r} is not tokenizable: {exc}") from None
        tree._insert(ids)
    return tree


def valid_set(tree: PrefixTree, cursor: TrieCursor) -> list[int]:
    """Tokens that may extend some bias word now, in sorted order."""
    out: set[int] = set(tree.children(tree.root))
    for node in cursor.active_nodes:
        out.update(tree.children(node))
    return sorted(out)


def advance_cursor(tree: PrefixTree, cursor: TrieCursor, emitted: int) -> TrieCursor:
    """Step every active path (and the root) through ``emitted``.

    A reached node stays active only if it has continuations; reaching a
    childless node means a bias word just completed and that path retires.
    Re-matching afterwards needs a fresh boundary token from the root.
    """
    nxt: set[int] = set()
    for node in cursor.active_nodes:
        child = tree.children(node).get(emitted)
        if child is not None and tree.children(child):
            nxt.add(child)
    root_child = tree.children(tree.root).get(emitted)
    if root_child is not None and tree.children(root_child):
        nxt.add(root_child)
    return TrieCursor(frozenset(nxt))
