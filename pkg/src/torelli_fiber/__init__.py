"""Strata, local equations and plumbing expansions for the fiber product of
the Torelli map with product loci of principally polarized abelian varieties."""

__version__ = "0.1.0"
