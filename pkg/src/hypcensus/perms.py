"""Permutations of {0,1,2,3}, encoded as 4-tuples, with lookup tables.

A gluing permutation maps vertex labels of the source tetrahedron to
vertex labels of the target tetrahedron.  Composition ``compose(p, q)``
is "q after p", i.e. ``compose(p, q)[i] == q[p[i]]``.
"""

from itertools import permutations as _permutations

Perm = tuple[int, int, int, int]

IDENTITY: Perm = (0, 1, 2, 3)

#: All 24 permutations in lexicographic order.
ALL: tuple[Perm, ...] = tuple(_permutations(range(4)))

INDEX: dict[Perm, int] = {p: i for i, p in enumerate(ALL)}


def parity(p: Perm) -> int:
    """0 for even, 1 for odd."""
    inv = 0
    for i in range(4):
        for j in range(i + 1, 4):
            if p[i] > p[j]:
                inv += 1
    return inv & 1


PARITY: tuple[int, ...] = tuple(parity(p) for p in ALL)

ODD: tuple[Perm, ...] = tuple(p for p in ALL if parity(p) == 1)
EVEN: tuple[Perm, ...] = tuple(p for p in ALL if parity(p) == 0)


def invert(p: Perm) -> Perm:
    out = [0, 0, 0, 0]
    for i in range(4):
        out[p[i]] = i
    return tuple(out)  # type: ignore[return-value]


def compose(p: Perm, q: Perm) -> Perm:
    """Apply p first, then q."""
    return (q[p[0]], q[p[1]], q[p[2]], q[p[3]])


INVERSE: tuple[Perm, ...] = tuple(invert(p) for p in ALL)

#: Odd permutations sending vertex f to vertex g, for use as gluing
#: candidates between face f and face g of oriented tetrahedra.
ODD_SENDING: dict[tuple[int, int], tuple[Perm, ...]] = {
    (f, g): tuple(p for p in ODD if p[f] == g) for f in range(4) for g in range(4)
}
