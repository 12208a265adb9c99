import ast
import math
import re
from typing import Callable, Dict, List

import numpy
from numpy import ndarray

from phimono.core import Interval, ParsingException, RealFunction


class ExpressionEvaluationError(ArithmeticError):
    pass


variable_names = ("x", "t")

constants = {"pi": math.pi, "e": math.e}


def _reduce(operation: Callable[[ndarray, ndarray], ndarray]) -> Callable[..., ndarray]:
    def reduced(*arguments):
        result = arguments[0]
        for argument in arguments[1:]:
            result = operation(result, argument)
        return result

    return reduced


functions: Dict[str, Callable[..., ndarray]] = {
    "sqrt": numpy.sqrt,
    "abs": numpy.abs,
    "exp": numpy.exp,
    "log": numpy.log,
    "min": _reduce(numpy.minimum),
    "max": _reduce(numpy.maximum),
    "if_": numpy.where,
}

arities = {"sqrt": (1, 1), "abs": (1, 1), "exp": (1, 1), "log": (1, 1), "min": (2, None), "max": (2, None),
           "if_": (3, 3)}

binary_operations = {
    ast.Add: numpy.add,
    ast.Sub: numpy.subtract,
    ast.Mult: numpy.multiply,
    ast.Div: numpy.divide,
    ast.Pow: numpy.power,
}

comparisons = {
    ast.Lt: numpy.less,
    ast.LtE: numpy.less_equal,
    ast.Gt: numpy.greater,
    ast.GtE: numpy.greater_equal,
    ast.Eq: numpy.equal,
    ast.NotEq: numpy.not_equal,
}


def normalize(source: str) -> str:
    """Maps the surface syntax onto Python's: `^` is power and `if(c, a, b)` becomes `if_(c, a, b)`."""
    return re.sub(r"\bif\s*\(", "if_(", source.replace("^", "**"))


class ExpressionFunction(RealFunction):
    """
    Closed-form body over the variable x (or t) with the operators + - * / ^, the functions
    sqrt, abs, exp, log, min, max, the constants pi and e, comparisons and the piecewise `if(cond, a, b)`.
    """

    def __init__(self, domain: Interval, source: str):
        self.source = source.strip()
        if not self.source:
            raise ParsingException("Empty expression.")
        try:
            self.tree = ast.parse(normalize(self.source), mode='eval').body
        except SyntaxError as e:
            raise ParsingException("Malformed expression '{}': {}".format(self.source, e.msg))

        self._validate(self.tree)
        super().__init__(domain, knots=self._comparison_knots(self.tree))

    def _validate(self, node: ast.AST) -> None:
        if isinstance(node, ast.Constant):
            if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
                raise ParsingException("Unsupported literal {!r} in '{}'.".format(node.value, self.source))
        elif isinstance(node, ast.Name):
            if node.id not in variable_names and node.id not in constants:
                raise ParsingException("Unknown identifier '{}' in '{}'.".format(node.id, self.source))
        elif isinstance(node, ast.BinOp):
            if type(node.op) not in binary_operations:
                raise ParsingException("Unsupported operator in '{}'.".format(self.source))
            self._validate(node.left)
            self._validate(node.right)
        elif isinstance(node, ast.UnaryOp):
            if not isinstance(node.op, (ast.USub, ast.UAdd)):
                raise ParsingException("Unsupported unary operator in '{}'.".format(self.source))
            self._validate(node.operand)
        elif isinstance(node, ast.Compare):
            if any(type(op) not in comparisons for op in node.ops):
                raise ParsingException("Unsupported comparison in '{}'.".format(self.source))
            for child in [node.left] + node.comparators:
                self._validate(child)
        elif isinstance(node, ast.BoolOp):
            for child in node.values:
                self._validate(child)
        elif isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in functions or node.keywords:
                raise ParsingException("Unknown function in '{}'.".format(self.source))
            minimum, maximum = arities[node.func.id]
            if len(node.args) < minimum or (maximum is not None and len(node.args) > maximum):
                raise ParsingException("Wrong number of arguments to {} in '{}'.".format(
                    node.func.id.rstrip("_"), self.source))
            for argument in node.args:
                self._validate(argument)
        else:
            raise ParsingException("Unsupported syntax '{}' in '{}'.".format(type(node).__name__, self.source))

    @staticmethod
    def _is_variable(node: ast.AST) -> bool:
        return isinstance(node, ast.Name) and node.id in variable_names

    @staticmethod
    def _mentions_variable(node: ast.AST) -> bool:
        return any(ExpressionFunction._is_variable(child) for child in ast.walk(node))

    def _comparison_knots(self, tree: ast.AST) -> List[float]:
        """Constants compared against the bare variable, where piecewise bodies may jump or kink."""
        knots = []
        for node in ast.walk(tree):
            if not isinstance(node, ast.Compare):
                continue
            operands = [node.left] + node.comparators
            for left, right in zip(operands, operands[1:]):
                for variable, bound in ((left, right), (right, left)):
                    if self._is_variable(variable) and not self._mentions_variable(bound):
                        knots.append(float(self._evaluate(bound, numpy.zeros(1))[0]))
        return [knot for knot in knots if math.isfinite(knot)]

    def _evaluate(self, node: ast.AST, xs: ndarray) -> ndarray:
        if isinstance(node, ast.Constant):
            return numpy.full(xs.shape, float(node.value))
        if isinstance(node, ast.Name):
            return xs if node.id in variable_names else numpy.full(xs.shape, constants[node.id])
        if isinstance(node, ast.BinOp):
            return binary_operations[type(node.op)](self._evaluate(node.left, xs), self._evaluate(node.right, xs))
        if isinstance(node, ast.UnaryOp):
            operand = self._evaluate(node.operand, xs)
            return -operand if isinstance(node.op, ast.USub) else operand
        if isinstance(node, ast.Compare):
            operands = [self._evaluate(child, xs) for child in [node.left] + node.comparators]
            result = numpy.ones(xs.shape, dtype=bool)
            for op, left, right in zip(node.ops, operands, operands[1:]):
                result &= comparisons[type(op)](left, right)
            return result
        if isinstance(node, ast.BoolOp):
            combine = numpy.logical_and if isinstance(node.op, ast.And) else numpy.logical_or
            return _reduce(combine)(*[self._evaluate(child, xs) for child in node.values])
        if isinstance(node, ast.Call):
            arguments = [self._evaluate(argument, xs) for argument in node.args]
            if node.func.id == "if_":
                arguments[0] = arguments[0].astype(bool)
            return functions[node.func.id](*arguments)
        raise ParsingException("Unsupported syntax '{}'.".format(type(node).__name__))

    def _body(self, xs: ndarray) -> ndarray:
        with numpy.errstate(all='ignore'):
            result = numpy.asarray(self._evaluate(self.tree, xs), dtype=float)

        undefined = ~numpy.isfinite(result)
        if numpy.any(undefined):
            raise ExpressionEvaluationError("'{}' is undefined at x = {}.".format(
                self.source, numpy.asarray(xs)[undefined].flat[0]))
        return result

    def __str__(self):
        return self.source
