"""Reference implementations for the ensemble step, one weight vector at a time."""

from fairness_oracle import oracle_metrics


def oracle_combine(weights, rows):
    """rows: list of per-instance lists of per-model probability vectors."""
    out = []
    for models in rows:
        n_classes = len(models[0])
        scores = [sum(w * probs[c] for w, probs in zip(weights, models)) for c in range(n_classes)]
        best = 0
        for c in range(1, n_classes):
            if scores[c] > scores[best]:
                best = c
        out.append(best)
    return out


def oracle_candidate(weights, rows, truth, groups, metric="eoo"):
    pred = oracle_combine(weights, rows)
    m = oracle_metrics(list(zip(pred, truth, groups)))
    return m["accuracy_overall"], m["delta_eoo" if metric == "eoo" else "delta_disc"]


def oracle_frontier(points):
    """points: list of (accuracy, gap, weights). Pairwise dominance, duplicates keep smallest weights."""
    def dom(a, b):
        return a[0] >= b[0] and a[1] <= b[1] and (a[0] > b[0] or a[1] < b[1])

    keep = [p for p in points if not any(dom(q, p) for q in points)]
    best = {}
    for p in keep:
        key = (p[0], p[1])
        if key not in best or p[2] < best[key][2]:
            best[key] = p
    return set(best.values())
