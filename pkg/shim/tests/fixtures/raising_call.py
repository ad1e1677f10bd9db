# Description: Fails immediately when invoked, before any evaluation.


class ExplodingBO:
    def __init__(self, budget, dim):
        self.budget = budget
        self.dim = dim

    def __call__(self, func):
        raise RuntimeError("surrogate exploded")
