"""Holomorphic self-maps: parsing, jets and boundary data."""
from .ast import (Add, Const, Div, IntPow, Mul, Neg, Node, Sub, Var, evaluate, fold,
                  has_division, to_string)
from .boundary import (ContactFit, SameMap, angular_derivative, data_contact_order,
                       order_of_contact_check, self_map_check)
from .jet import Jet, eval_jet
from .parser import parse_map, tokenize

MapExpr = Node

__all__ = [
    "Add", "Const", "Div", "IntPow", "Mul", "Neg", "Node", "Sub", "Var", "MapExpr",
    "evaluate", "fold", "has_division", "to_string", "ContactFit", "SameMap",
    "angular_derivative", "data_contact_order", "order_of_contact_check",
    "self_map_check", "Jet", "eval_jet", "parse_map", "tokenize",
]
