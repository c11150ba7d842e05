"""Mixed-initiative puzzle level workbench.

Humans and a small evolution strategy co-design levels for a word-rule
grid puzzle; an automated playtester verifies them, and an archive keyed
by activated rule mechanics organizes the results and suggests unmade
mechanic combinations.
"""

__version__ = "0.1.0"
