"""Plain-math recomputation of the default geometry scores, written without the package."""

import math


def _centroid(pts, idx):
    return (sum(pts[i][0] for i in idx) / len(idx), sum(pts[i][1] for i in idx) / len(idx))


def oracle_scores(pts):
    left_eye = _centroid(pts, range(36, 42))
    right_eye = _centroid(pts, range(42, 48))
    nose_tip = pts[30]
    d_left, d_right = math.dist(left_eye, nose_tip), math.dist(right_eye, nose_tip)

    r1 = math.dist(_centroid(pts, (21, 22)), pts[8]) / math.dist(pts[0], pts[16])
    r2 = math.dist(_centroid(pts, range(36, 48)), pts[8]) / math.dist(pts[33], pts[8])

    pairs = [(k, 16 - k) for k in range(8)] + [(17 + k, 26 - k) for k in range(5)]
    pairs += [(36, 45), (37, 44), (38, 43), (39, 42), (40, 47), (41, 46), (31, 35), (32, 34)]
    pairs += [(48, 54), (49, 53), (50, 52), (59, 55), (58, 56), (60, 64), (61, 63), (67, 65)]
    mid = sum(pts[i][0] for i in (27, 28, 29, 30, 33, 51, 57, 8)) / 8
    iod = math.dist(left_eye, right_eye)
    total = sum(abs((mid - pts[i][0]) - (pts[j][0] - mid)) + abs(pts[i][1] - pts[j][1]) for i, j in pairs)

    nose = math.dist(pts[31], pts[35])
    devs = [
        abs(math.dist(pts[39], pts[42]) - nose) / nose,
        abs(math.dist(pts[48], pts[54]) - 1.5 * nose) / (1.5 * nose),
        abs(nose - 0.25 * math.dist(pts[0], pts[16])) / (0.25 * math.dist(pts[0], pts[16])),
    ]
    return {
        "eye_nose_gap": abs(d_left - d_right),
        "golden_ratio": (r1 + r2) / 2,
        "symmetry": 100 * total / (len(pairs) * iod),
        "neocanons": sum(devs) / 3,
    }
