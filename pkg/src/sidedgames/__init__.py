"""Exact simulation of sided betting games: gales, referee, strategies, LP adversaries."""
from .gales import GaleTree, GaleVector, SidePolicy
from .referee import GameSpec, GameState, Kind

__all__ = ["GaleTree", "GaleVector", "SidePolicy", "GameSpec", "GameState", "Kind"]
