def transpose(m):
    rows = len(m)
    cols = len(m[0])
    out = [[m[r][c] for r in range(rows)] for c in range(cols)]
    return out


def identity(n):
    out = [[0] * n for _ in range(n)]
    for i in range(n):
        out[i][i] = 1
    return out
