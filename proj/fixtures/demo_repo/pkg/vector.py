def dot(a, b):
    total = 0
    for x, y in zip(a, b):
        total += x * y
    return total


def scale(v, k):
    out = []
    for x in v:
        out.append(x * k)
    return out
