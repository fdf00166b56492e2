from __future__ import annotations

from dataclasses import replace

from ..conllu import Sentence, find_cycles


def repair_heads(heads: list[int]) -> list[int]:
    """Turn any head assignment into a single-rooted tree.

    Extra roots are reattached to the first root; out-of-range heads and
    the lowest-id member of each cycle go to that root, or become the root
    themselves when none exists yet.
    """
    heads = list(heads)
    n = len(heads)
    roots = [i for i, h in enumerate(heads, start=1) if h == 0]
    root = roots[0] if roots else None
    for r in roots[1:]:
        heads[r - 1] = root

    for i, h in enumerate(heads, start=1):
        if h < 0 or h > n:
            if root is None:
                heads[i - 1] = 0
                root = i
            else:
                heads[i - 1] = root

    while True:
        cycles = find_cycles(heads)
        if not cycles:
            break
        # Repairing one cycle can never create another, so fix them all now.
        for cycle in cycles:
            lowest = cycle[0]
            if root is None:
                heads[lowest - 1] = 0
                root = lowest
            else:
                heads[lowest - 1] = root
    return heads


def repair_tree(s: Sentence) -> Sentence:
    heads = repair_heads([t.head for t in s.tokens])
    if heads == [t.head for t in s.tokens]:
        return s
    return s.with_tokens(replace(t, head=h) for t, h in zip(s.tokens, heads))
