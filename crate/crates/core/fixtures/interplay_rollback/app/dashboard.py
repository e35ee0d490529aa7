class Dashboard:
    def __init__(self, data):
        self.data = data
        self.degraded = 0

    def widget_x(self):
        try:
            return "x=%d" % int(self.data["x"])
        except ValueError:
            return "x=?"

    def widget_y(self):
        try:
            return "y=%d" % int(self.data["y"])
        except ValueError:
            return "y=?"

    def render(self):
        parts = []
        for widget in (self.widget_x, self.widget_y):
            try:
                parts.append(widget())
            except Exception:
                self.degraded += 1
                parts.append("-")
        return " ".join(parts)

    def health(self):
        return "degraded" if self.degraded else "ok"
