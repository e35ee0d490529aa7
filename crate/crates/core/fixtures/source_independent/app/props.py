class MissingPropertyException(Exception):
    pass


PROPERTIES = {"db.host": "localhost", "db.port": "5432"}


def get_argument(name):
    return name


def format_key(arg):
    return arg.strip().lower()


def get_property(key, use_cache):
    if key not in PROPERTIES:
        raise MissingPropertyException(key)
    return PROPERTIES[key]


def lookup(name, is_cache_activated=True):
    try:
        arg = get_argument(name)
        key = format_key(arg)
        return get_property(key, is_cache_activated)
    except MissingPropertyException:
        return "missing property"
