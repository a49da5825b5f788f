"""Repeated two-sided matching under envy-freeness up to one match."""
