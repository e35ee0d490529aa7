def area(w, h):
    if w < 0 or h < 0:
        raise ValueError("negative side")
    return w * h


def safe_area(w, h):
    try:
        return area(w, h)
    except ValueError:
        return 0


def total_area(shapes):
    return sum(safe_area(w, h) for w, h in shapes)
