def parse_ratio(text):
    try:
        num, den = text.split("/")
        return int(num) / int(den)
    except ZeroDivisionError:
        return float("inf")


def first_word(text):
    try:
        return text.split()[0]
    except IndexError:
        return ""


def read_file(path):
    try:
        with open(path) as fh:
            return fh.read()
    except OSError:
        return None


def normalize_all(values):
    out = []
    for v in values:
        try:
            out.append(int(v))
        except ValueError:
            out.append(0)
    return out
