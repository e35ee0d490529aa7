def parse_int(text, default=0):
    try:
        return int(text)
    except ValueError:
        return default


def parse_all(items):
    return [parse_int(i, default=-1) for i in items]
