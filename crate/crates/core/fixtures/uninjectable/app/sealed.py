_TOKEN = object()


class SealedError(Exception):
    def __init_subclass__(cls, **kwargs):
        raise TypeError("SealedError cannot be subclassed")

    def __init__(self, token):
        if token is not _TOKEN:
            raise TypeError("SealedError has a private constructor")
        super().__init__("sealed")


class QuotaError(Exception):
    def __init__(self, used, limit):
        super().__init__("quota %d/%d" % (used, limit))
        self.used = used
        self.limit = limit


def risky(flag):
    if flag:
        raise SealedError(_TOKEN)
    return "ok"


def guarded(flag):
    try:
        return risky(flag)
    except SealedError:
        return "recovered"


def upload(size, limit=10):
    try:
        if size > limit:
            raise QuotaError(size, limit)
        return "stored"
    except QuotaError:
        return "rejected"
