def repeat(s, n):
    parts = []
    for _ in range(n):
        parts.append(s)
    return "".join(parts)


def shout(s):
    upper = s.upper()
    banged = upper + "!"
    return banged
