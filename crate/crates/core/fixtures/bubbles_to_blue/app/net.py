DEFAULT_PORT = 8080


def parse_port(value):
    try:
        port = int(value)
    except ValueError:
        return DEFAULT_PORT
    if not 0 < port < 65536:
        raise ValueError("port out of range: %d" % port)
    return port
