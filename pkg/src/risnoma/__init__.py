"""Simulation and learning toolkit for RIS-assisted NOMA downlinks.

Modules: ``channel`` (path loss, fading, composite channels), ``precoding``
(ZF and projection-based NOMA beams), ``noma`` (clusters, SIC, link budgets),
``metrics`` (MOS, power, energy efficiency), ``env`` (the decision process),
``nn`` and ``rl`` (Q-learning agents), ``traffic`` (echo state networks),
``control`` (model-based baselines) and ``harness`` (experiments and CSVs).
"""

__version__ = "0.1.0"
