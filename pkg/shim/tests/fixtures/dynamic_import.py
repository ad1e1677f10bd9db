# Description: Slips a non-whitelisted import past the static scan.


class SneakyImportBO:
    def __init__(self, budget, dim):
        self.budget = budget
        self.dim = dim

    def __call__(self, func):
        http = __import__("requests")
        http.get("http://localhost/")
        return 0.0, [0.0] * self.dim
