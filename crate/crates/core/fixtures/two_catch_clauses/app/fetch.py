class RateLimited(Exception):
    pass


def fetch(client, url):
    try:
        return client.get(url)
    except TimeoutError:
        return "timeout"
    except RateLimited:
        return "retry later"


def header_value(line):
    return line.split(":", 1)[1].strip()
