import collections


def instantiable_collection(prototype):
    """Returns a collection class with a no-argument constructor that is
    compatible with the prototype's class."""
    clazz = type(prototype)
    try:
        clazz()
        return clazz
    except TypeError:
        if issubclass(clazz, collections.deque):
            return collections.deque
        elif issubclass(clazz, list):
            return list
        elif issubclass(clazz, frozenset):
            return frozenset
        else:
            return set
