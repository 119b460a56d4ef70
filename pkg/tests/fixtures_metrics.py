"""Ten 2x3 prediction/target pairs with confusion counts counted by hand.

Each entry: (class_id, pred, target, (fg_inter, fg_union), (bg_inter, bg_union)).
Class-pooled foreground IoUs: c0 1/2, c1 0/12, c2 5/10, c3 4/6, c4 3/9
-> mIoU = 2/5.  FB-IoU = (13 + 21) / (39 + 47) = 34/86.
"""

PAIRS = [
    (0, [[1, 1, 0], [0, 0, 0]], [[1, 0, 0], [0, 0, 0]], (1, 2), (4, 5)),
    (0, [[0, 0, 0], [0, 0, 0]], [[0, 0, 0], [0, 0, 0]], (0, 0), (6, 6)),
    (1, [[1, 1, 1], [1, 1, 1]], [[0, 0, 0], [0, 0, 0]], (0, 6), (0, 6)),
    (1, [[1, 0, 1], [0, 1, 0]], [[0, 1, 0], [1, 0, 1]], (0, 6), (0, 6)),
    (2, [[1, 1, 1], [0, 0, 0]], [[1, 1, 1], [1, 1, 1]], (3, 6), (0, 3)),
    (2, [[0, 1, 1], [0, 1, 1]], [[0, 0, 1], [0, 0, 1]], (2, 4), (2, 4)),
    (3, [[1, 0, 0], [0, 0, 1]], [[1, 0, 0], [0, 0, 1]], (2, 2), (4, 4)),
    (3, [[0, 0, 0], [1, 1, 1]], [[0, 1, 0], [1, 1, 0]], (2, 4), (2, 4)),
    (4, [[1, 1, 0], [1, 1, 0]], [[0, 1, 1], [0, 1, 1]], (2, 6), (0, 4)),
    (4, [[0, 0, 1], [0, 0, 0]], [[1, 1, 1], [0, 0, 0]], (1, 3), (3, 5)),
]

MIOU = 2 / 5
FB_IOU = 34 / 86
