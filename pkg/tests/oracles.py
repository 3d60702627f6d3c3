"""Independent reference implementations used by the tests.

Deliberately naive: plain Python loops over the textbook definitions, no
numpy and nothing shared with the package.
"""

EPS = 1e-12


def brute_k_distance(points, a, k):
    dists = sorted(abs(points[a] - points[b]) for b in range(len(points)) if b != a)
    d_k = dists[k - 1]
    neighbors = [b for b in range(len(points)) if b != a and abs(points[a] - points[b]) <= d_k]
    return d_k, neighbors


def brute_lof(points, k):
    n = len(points)
    kd = [brute_k_distance(points, a, k) for a in range(n)]
    lrd = []
    for a in range(n):
        _, nbrs = kd[a]
        total = 0.0
        for b in nbrs:
            total += max(kd[b][0], abs(points[a] - points[b]))
        lrd.append(1.0 / max(total / len(nbrs), EPS))
    scores = []
    for a in range(n):
        _, nbrs = kd[a]
        scores.append(sum(lrd[b] / lrd[a] for b in nbrs) / len(nbrs))
    return scores


def central_difference(f, x, h=1e-5):
    return (f(x + h) - f(x - h)) / (2 * h)
