"""Generate the product tables of the projective algebra G(3,0,1).

Running ``python -m hpga_dp.pga.codegen`` rewrites ``_tables.py`` next to this
file. The runtime never builds tables itself; it imports the generated module.

Blades are handled as bitmasks over the generators ``e0 .. e3`` (bit ``i`` set
means ``e_i`` is a factor). The coefficient layout is the fixed list in
:data:`BLADES`.
"""

from __future__ import annotations

import pprint
from pathlib import Path

BLADES: tuple[tuple[int, ...], ...] = (
    (),
    (0,), (1,), (2,), (3,),
    (0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3),
    (0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3),
    (0, 1, 2, 3),
)
BLADE_NAMES = tuple("1" if not b else "e" + "".join(map(str, b)) for b in BLADES)
METRIC = (0, 1, 1, 1)  # e0^2 = 0, e1^2 = e2^2 = e3^2 = 1
NONE = -1


def _mask(blade: tuple[int, ...]) -> int:
    return sum(1 << i for i in blade)


_INDEX_OF_MASK = {_mask(b): n for n, b in enumerate(BLADES)}


def _reorder_sign(a: int, b: int) -> int:
    """Sign picked up moving the generators of ``b`` left past those of ``a``."""
    swaps = 0
    a >>= 1
    while a:
        swaps += bin(a & b).count("1")
        a >>= 1
    return -1 if swaps & 1 else 1


def blade_product(i: int, j: int) -> tuple[int, int]:
    """Geometric product of basis blades ``i`` and ``j`` as ``(index, sign)``."""
    a, b = _mask(BLADES[i]), _mask(BLADES[j])
    sign = _reorder_sign(a, b)
    common = a & b
    for g in range(4):
        if common >> g & 1:
            sign *= METRIC[g]
    if sign == 0:
        return NONE, 0
    return _INDEX_OF_MASK[a ^ b], sign


def build_cayley_table() -> tuple[tuple[tuple[int, int], ...], ...]:
    """16x16 table of ``(target_index, sign)``; ``(NONE, 0)`` marks a zero product."""
    return tuple(tuple(blade_product(i, j) for j in range(16)) for i in range(16))


def build_outer_table() -> tuple[tuple[tuple[int, int], ...], ...]:
    table = []
    for i in range(16):
        row = []
        for j in range(16):
            if _mask(BLADES[i]) & _mask(BLADES[j]):
                row.append((NONE, 0))
            else:
                row.append(blade_product(i, j))
        table.append(tuple(row))
    return tuple(table)


def build_dual() -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Complement index and sign so that ``blade ^ dual(blade) = +e0123``."""
    index, sign = [], []
    full = _mask(BLADES[15])
    for i, blade in enumerate(BLADES):
        comp = _INDEX_OF_MASK[full ^ _mask(blade)]
        _, s = blade_product(i, comp)
        index.append(comp)
        sign.append(s)
    return tuple(index), tuple(sign)


def render() -> str:
    gp = build_cayley_table()
    op = build_outer_table()
    dual_index, dual_sign = build_dual()
    grades = tuple(len(b) for b in BLADES)
    reverse_sign = tuple(1 if (k * (k - 1) // 2) % 2 == 0 else -1 for k in grades)
    assert sorted(dual_index) == list(range(16))

    def fmt(obj: object) -> str:
        return pprint.pformat(obj, width=100, compact=True)

    return (
        '"""Generated by hpga_dp.pga.codegen; do not edit by hand."""\n\n'
        f"BLADES = {fmt(BLADES)}\n\n"
        f"BLADE_NAMES = {fmt(BLADE_NAMES)}\n\n"
        f"GRADES = {fmt(grades)}\n\n"
        f"REVERSE_SIGN = {fmt(reverse_sign)}\n\n"
        f"DUAL_INDEX = {fmt(dual_index)}\n\n"
        f"DUAL_SIGN = {fmt(dual_sign)}\n\n"
        "# (target blade index, sign); target -1 with sign 0 means the product vanishes\n"
        f"GEOMETRIC = {fmt(gp)}\n\n"
        f"OUTER = {fmt(op)}\n"
    )


def main() -> None:
    path = Path(__file__).with_name("_tables.py")
    path.write_text(render())
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
