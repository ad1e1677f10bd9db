# Description: Seeded uniform search in the template shape.
import numpy as np


class TemplateSearchBO:
    def __init__(self, budget, dim):
        self.budget = budget
        self.dim = dim
        self.bounds = np.array([[-5.0] * dim, [5.0] * dim])

    def __call__(self, func):
        rng = np.random.default_rng(0)
        best_y, best_x = float("inf"), None
        for _ in range(self.budget):
            x = rng.uniform(self.bounds[0], self.bounds[1])
            y = func(x)
            if y < best_y:
                best_y, best_x = y, x
        return best_y, best_x
