class ConnectionLost(Exception):
    pass


class Channel:
    def __init__(self, failures=0):
        self.failures = failures
        self.attempts = 0

    def send(self, message):
        self.attempts += 1
        if self.failures > 0:
            self.failures -= 1
            raise ConnectionLost()
        return "sent:" + message


def send_with_retry(channel, message):
    while True:
        try:
            return channel.send(message)
        except ConnectionLost:
            continue
