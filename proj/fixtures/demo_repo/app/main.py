from pkg.vector import dot, scale


def run(values):
    doubled = scale(values, 2)
    score = dot(values, doubled)
    return score
