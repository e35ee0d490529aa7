class NonUniqueResultError(Exception):
    pass


class IllegalStateError(Exception):
    pass


class Session:
    def __init__(self, rows, closed=False):
        self.rows = list(rows)
        self.closed = closed

    def single_result(self, query):
        if self.closed:
            raise IllegalStateError("session closed")
        matches = [r for r in self.rows if query in r]
        if len(matches) > 1:
            raise NonUniqueResultError(query)
        return matches[0] if matches else None


def find_one(session, query):
    try:
        return session.single_result(query)
    except NonUniqueResultError:
        return None


def load_config(session, query):
    try:
        return find_one(session, query)
    except IllegalStateError:
        return "reconnect"
