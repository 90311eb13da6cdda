"""Galerkin BEM for acoustic transmission through penetrable objects."""
