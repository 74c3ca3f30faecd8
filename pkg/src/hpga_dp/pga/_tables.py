"""Generated by hpga_dp.pga.codegen; do not edit by hand."""

BLADES = ((), (0,), (1,), (2,), (3,), (0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3), (0, 1, 2), (0, 1, 3),
 (0, 2, 3), (1, 2, 3), (0, 1, 2, 3))

BLADE_NAMES = ('1', 'e0', 'e1', 'e2', 'e3', 'e01', 'e02', 'e03', 'e12', 'e13', 'e23', 'e012', 'e013', 'e023',
 'e123', 'e0123')

GRADES = (0, 1, 1, 1, 1, 2, 2, 2, 2, 2, 2, 3, 3, 3, 3, 4)

REVERSE_SIGN = (1, 1, 1, 1, 1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, 1)

DUAL_INDEX = (15, 14, 13, 12, 11, 10, 9, 8, 7, 6, 5, 4, 3, 2, 1, 0)

DUAL_SIGN = (1, 1, -1, 1, -1, 1, -1, 1, 1, -1, 1, 1, -1, 1, -1, 1)

# (target blade index, sign); target -1 with sign 0 means the product vanishes
GEOMETRIC = (((0, 1), (1, 1), (2, 1), (3, 1), (4, 1), (5, 1), (6, 1), (7, 1), (8, 1), (9, 1), (10, 1), (11, 1),
  (12, 1), (13, 1), (14, 1), (15, 1)),
 ((1, 1), (-1, 0), (5, 1), (6, 1), (7, 1), (-1, 0), (-1, 0), (-1, 0), (11, 1), (12, 1), (13, 1),
  (-1, 0), (-1, 0), (-1, 0), (15, 1), (-1, 0)),
 ((2, 1), (5, -1), (0, 1), (8, 1), (9, 1), (1, -1), (11, -1), (12, -1), (3, 1), (4, 1), (14, 1),
  (6, -1), (7, -1), (15, -1), (10, 1), (13, -1)),
 ((3, 1), (6, -1), (8, -1), (0, 1), (10, 1), (11, 1), (1, -1), (13, -1), (2, -1), (14, -1), (4, 1),
  (5, 1), (15, 1), (7, -1), (9, -1), (12, 1)),
 ((4, 1), (7, -1), (9, -1), (10, -1), (0, 1), (12, 1), (13, 1), (1, -1), (14, 1), (2, -1), (3, -1),
  (15, -1), (5, 1), (6, 1), (8, 1), (11, -1)),
 ((5, 1), (-1, 0), (1, 1), (11, 1), (12, 1), (-1, 0), (-1, 0), (-1, 0), (6, 1), (7, 1), (15, 1),
  (-1, 0), (-1, 0), (-1, 0), (13, 1), (-1, 0)),
 ((6, 1), (-1, 0), (11, -1), (1, 1), (13, 1), (-1, 0), (-1, 0), (-1, 0), (5, -1), (15, -1), (7, 1),
  (-1, 0), (-1, 0), (-1, 0), (12, -1), (-1, 0)),
 ((7, 1), (-1, 0), (12, -1), (13, -1), (1, 1), (-1, 0), (-1, 0), (-1, 0), (15, 1), (5, -1), (6, -1),
  (-1, 0), (-1, 0), (-1, 0), (11, 1), (-1, 0)),
 ((8, 1), (11, 1), (3, -1), (2, 1), (14, 1), (6, -1), (5, 1), (15, 1), (0, -1), (10, -1), (9, 1),
  (1, -1), (13, -1), (12, 1), (4, -1), (7, -1)),
 ((9, 1), (12, 1), (4, -1), (14, -1), (2, 1), (7, -1), (15, -1), (5, 1), (10, 1), (0, -1), (8, -1),
  (13, 1), (1, -1), (11, -1), (3, 1), (6, 1)),
 ((10, 1), (13, 1), (14, 1), (4, -1), (3, 1), (15, 1), (7, -1), (6, 1), (9, -1), (8, 1), (0, -1),
  (12, -1), (11, 1), (1, -1), (2, -1), (5, -1)),
 ((11, 1), (-1, 0), (6, -1), (5, 1), (15, 1), (-1, 0), (-1, 0), (-1, 0), (1, -1), (13, -1), (12, 1),
  (-1, 0), (-1, 0), (-1, 0), (7, -1), (-1, 0)),
 ((12, 1), (-1, 0), (7, -1), (15, -1), (5, 1), (-1, 0), (-1, 0), (-1, 0), (13, 1), (1, -1),
  (11, -1), (-1, 0), (-1, 0), (-1, 0), (6, 1), (-1, 0)),
 ((13, 1), (-1, 0), (15, 1), (7, -1), (6, 1), (-1, 0), (-1, 0), (-1, 0), (12, -1), (11, 1), (1, -1),
  (-1, 0), (-1, 0), (-1, 0), (5, -1), (-1, 0)),
 ((14, 1), (15, -1), (10, 1), (9, -1), (8, 1), (13, -1), (12, 1), (11, -1), (4, -1), (3, 1),
  (2, -1), (7, 1), (6, -1), (5, 1), (0, -1), (1, 1)),
 ((15, 1), (-1, 0), (13, 1), (12, -1), (11, 1), (-1, 0), (-1, 0), (-1, 0), (7, -1), (6, 1), (5, -1),
  (-1, 0), (-1, 0), (-1, 0), (1, -1), (-1, 0)))

OUTER = (((0, 1), (1, 1), (2, 1), (3, 1), (4, 1), (5, 1), (6, 1), (7, 1), (8, 1), (9, 1), (10, 1), (11, 1),
  (12, 1), (13, 1), (14, 1), (15, 1)),
 ((1, 1), (-1, 0), (5, 1), (6, 1), (7, 1), (-1, 0), (-1, 0), (-1, 0), (11, 1), (12, 1), (13, 1),
  (-1, 0), (-1, 0), (-1, 0), (15, 1), (-1, 0)),
 ((2, 1), (5, -1), (-1, 0), (8, 1), (9, 1), (-1, 0), (11, -1), (12, -1), (-1, 0), (-1, 0), (14, 1),
  (-1, 0), (-1, 0), (15, -1), (-1, 0), (-1, 0)),
 ((3, 1), (6, -1), (8, -1), (-1, 0), (10, 1), (11, 1), (-1, 0), (13, -1), (-1, 0), (14, -1),
  (-1, 0), (-1, 0), (15, 1), (-1, 0), (-1, 0), (-1, 0)),
 ((4, 1), (7, -1), (9, -1), (10, -1), (-1, 0), (12, 1), (13, 1), (-1, 0), (14, 1), (-1, 0), (-1, 0),
  (15, -1), (-1, 0), (-1, 0), (-1, 0), (-1, 0)),
 ((5, 1), (-1, 0), (-1, 0), (11, 1), (12, 1), (-1, 0), (-1, 0), (-1, 0), (-1, 0), (-1, 0), (15, 1),
  (-1, 0), (-1, 0), (-1, 0), (-1, 0), (-1, 0)),
 ((6, 1), (-1, 0), (11, -1), (-1, 0), (13, 1), (-1, 0), (-1, 0), (-1, 0), (-1, 0), (15, -1),
  (-1, 0), (-1, 0), (-1, 0), (-1, 0), (-1, 0), (-1, 0)),
 ((7, 1), (-1, 0), (12, -1), (13, -1), (-1, 0), (-1, 0), (-1, 0), (-1, 0), (15, 1), (-1, 0),
  (-1, 0), (-1, 0), (-1, 0), (-1, 0), (-1, 0), (-1, 0)),
 ((8, 1), (11, 1), (-1, 0), (-1, 0), (14, 1), (-1, 0), (-1, 0), (15, 1), (-1, 0), (-1, 0), (-1, 0),
  (-1, 0), (-1, 0), (-1, 0), (-1, 0), (-1, 0)),
 ((9, 1), (12, 1), (-1, 0), (14, -1), (-1, 0), (-1, 0), (15, -1), (-1, 0), (-1, 0), (-1, 0),
  (-1, 0), (-1, 0), (-1, 0), (-1, 0), (-1, 0), (-1, 0)),
 ((10, 1), (13, 1), (14, 1), (-1, 0), (-1, 0), (15, 1), (-1, 0), (-1, 0), (-1, 0), (-1, 0), (-1, 0),
  (-1, 0), (-1, 0), (-1, 0), (-1, 0), (-1, 0)),
 ((11, 1), (-1, 0), (-1, 0), (-1, 0), (15, 1), (-1, 0), (-1, 0), (-1, 0), (-1, 0), (-1, 0), (-1, 0),
  (-1, 0), (-1, 0), (-1, 0), (-1, 0), (-1, 0)),
 ((12, 1), (-1, 0), (-1, 0), (15, -1), (-1, 0), (-1, 0), (-1, 0), (-1, 0), (-1, 0), (-1, 0),
  (-1, 0), (-1, 0), (-1, 0), (-1, 0), (-1, 0), (-1, 0)),
 ((13, 1), (-1, 0), (15, 1), (-1, 0), (-1, 0), (-1, 0), (-1, 0), (-1, 0), (-1, 0), (-1, 0), (-1, 0),
  (-1, 0), (-1, 0), (-1, 0), (-1, 0), (-1, 0)),
 ((14, 1), (15, -1), (-1, 0), (-1, 0), (-1, 0), (-1, 0), (-1, 0), (-1, 0), (-1, 0), (-1, 0),
  (-1, 0), (-1, 0), (-1, 0), (-1, 0), (-1, 0), (-1, 0)),
 ((15, 1), (-1, 0), (-1, 0), (-1, 0), (-1, 0), (-1, 0), (-1, 0), (-1, 0), (-1, 0), (-1, 0), (-1, 0),
  (-1, 0), (-1, 0), (-1, 0), (-1, 0), (-1, 0)))
