"""Evolving Bayesian-optimization algorithms with an LLM inside a
(mu+lambda)/(mu,lambda) evolution strategy, scored by the anytime area over
the convergence curve on an instance-parameterized test-function suite."""

__version__ = "0.1.0"
