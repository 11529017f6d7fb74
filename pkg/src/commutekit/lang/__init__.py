"""Source language: AST, values and state, parser, printer, static checks, input domains."""

from .ast import *  # noqa: F401,F403
from .domain import InputSpec, input_spec, parse_domain, parse_init  # noqa: F401
from .parser import ParseError, parse, parse_expr, parse_stmt  # noqa: F401
from .printer import print_expr, print_program, print_stmt  # noqa: F401
from .state import RuntimeFault, ScopedState, UnboundVariable  # noqa: F401
from .typecheck import CommuteSite, StaticTypeError, check_stmt  # noqa: F401
