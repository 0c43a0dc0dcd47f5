"""Independent brute-force reference implementations.

Everything here is deliberately written the slow, obvious way (pure-Python
loops, pair counting, direct entropy sums) so the fast numpy paths in the
package are checked against genuinely different code.
"""

import math


def ari_pair_counting(pred, truth):
    """ARI via O(n^2) pair agreement counts."""
    n = len(pred)
    a = b = c = d = 0
    for i in range(n):
        for j in range(i + 1, n):
            same_p = pred[i] == pred[j]
            same_t = truth[i] == truth[j]
            if same_p and same_t:
                a += 1
            elif same_p and not same_t:
                b += 1
            elif not same_p and same_t:
                c += 1
            else:
                d += 1
    num = 2.0 * (a * d - b * c)
    den = (a + b) * (b + d) + (a + c) * (c + d)
    if den == 0:
        return 1.0
    return num / den


def purity_loops(pred, truth):
    clusters = {}
    for p, t in zip(pred, truth):
        clusters.setdefault(p, []).append(t)
    correct = 0
    for members in clusters.values():
        counts = {}
        for t in members:
            counts[t] = counts.get(t, 0) + 1
        correct += max(counts.values())
    return correct / len(pred)


def homogeneity_entropy(pred, truth):
    n = len(pred)
    class_counts = {}
    for t in truth:
        class_counts[t] = class_counts.get(t, 0) + 1
    h_c = 0.0
    for count in class_counts.values():
        p = count / n
        h_c -= p * math.log(p)
    if h_c == 0.0:
        return 1.0
    cluster_members = {}
    for p, t in zip(pred, truth):
        cluster_members.setdefault(p, []).append(t)
    h_ck = 0.0
    for members in cluster_members.values():
        counts = {}
        for t in members:
            counts[t] = counts.get(t, 0) + 1
        for count in counts.values():
            h_ck -= (count / n) * math.log(count / len(members))
    return 1.0 - h_ck / h_c


def silhouette_loops(rows, pred):
    """Mean silhouette with cosine distance, all pure-Python loops."""
    n = len(rows)

    def cos_dist(u, v):
        dot = sum(ui * vi for ui, vi in zip(u, v))
        nu = math.sqrt(sum(ui * ui for ui in u))
        nv = math.sqrt(sum(vi * vi for vi in v))
        return max(1.0 - dot / (nu * nv), 0.0)

    clusters = {}
    for i, p in enumerate(pred):
        clusters.setdefault(p, []).append(i)
    total = 0.0
    for i in range(n):
        own = clusters[pred[i]]
        if len(own) == 1:
            continue  # singleton scores 0
        a = sum(cos_dist(rows[i], rows[j]) for j in own if j != i) / (len(own) - 1)
        b = math.inf
        for label, members in clusters.items():
            if label == pred[i]:
                continue
            b = min(b, sum(cos_dist(rows[i], rows[j]) for j in members) / len(members))
        denom = max(a, b)
        if denom > 0:
            total += (b - a) / denom
    return total / n


def spearman_naive(x, y):
    """Rank via sorted positions with tie averaging, then textbook Pearson."""

    def ranks(values):
        pairs = sorted(range(len(values)), key=lambda i: values[i])
        out = [0.0] * len(values)
        i = 0
        while i < len(pairs):
            j = i
            while j + 1 < len(pairs) and values[pairs[j + 1]] == values[pairs[i]]:
                j += 1
            avg = (i + j) / 2.0 + 1.0
            for idx in pairs[i : j + 1]:
                out[idx] = avg
            i = j + 1
        return out

    rx, ry = ranks(list(x)), ranks(list(y))
    mx = sum(rx) / len(rx)
    my = sum(ry) / len(ry)
    cov = sum((a - mx) * (b - my) for a, b in zip(rx, ry))
    vx = sum((a - mx) ** 2 for a in rx)
    vy = sum((b - my) ** 2 for b in ry)
    return cov / math.sqrt(vx * vy)


def top_eigen_energy(rows, ncomp=2):
    """Total variance captured by the top components, via a dense
    eigensolver on the covariance matrix."""
    import numpy as np

    x = np.asarray(rows, dtype=np.float64)
    xc = x - x.mean(axis=0)
    vals = np.linalg.eigvalsh(xc.T @ xc)
    return float(np.sort(vals)[::-1][:ncomp].sum())
