#!/usr/bin/env python3
# Copyright 2022 Canonical Ltd.
# See LICENSE file for licensing details.

"""Errors raised by the W4 root finder."""

from typing import Iterable


class SingularDecompositionError(Exception):
    """Raised if a UDL pivot vanishes and the Jacobian cannot be factored."""

    def __init__(self, pivot_index: int, pivot: float):
        self.pivot_index = pivot_index
        self.pivot = pivot
        self.message = "UDL pivot {} is {!r}, matrix is structurally singular".format(
            pivot_index, pivot
        )

        super().__init__(self.message)


class UnknownProblemError(LookupError):
    """Raised if a problem name is not in the registry."""

    def __init__(self, name: str, valid: Iterable[str]):
        self.name = name
        self.valid = sorted(valid)
        self.message = "Unknown problem '{}', valid names are: {}".format(
            name, ", ".join(self.valid)
        )

        super().__init__(self.message)


class InvalidConfigError(ValueError):
    """Raised if a solver or run configuration breaks one of its invariants."""

    def __init__(self, message: str):
        self.message = message

        super().__init__(self.message)


class UnsupportedMethodError(ValueError):
    """Raised if a method is applied to a problem it is not defined for."""

    def __init__(self, method: str, problem: str, reason: str):
        self.method = method
        self.problem = problem
        self.message = "Method '{}' cannot be used on '{}': {}".format(method, problem, reason)

        super().__init__(self.message)
