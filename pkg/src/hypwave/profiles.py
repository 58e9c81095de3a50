"""Radial bump profiles shared by the potential and the initial amplitude.

A profile is a function chi on [0, infinity) supported in [0, 1).  Two kinds:

    poly          chi(s) = (1 - s^2)^4
    plateau:A     chi(s) = 1 on [0, A], quartic rolloff (1 - q^2)^4 with
                  q = (s - A)/(1 - A) on (A, 1)

The poly kind is the default everywhere; the plateau kind is selected by
configs that need most of the bump mass at full height.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels

__all__ = ["BumpProfile"]


@dataclass(frozen=True)
class BumpProfile:
    kind: str = "poly"
    plateau_a: float = 0.0

    def __post_init__(self):
        if self.kind not in ("poly", "plateau"):
            raise ValueError(f"unknown profile kind {self.kind!r}")
        if self.kind == "plateau" and not 0.0 < self.plateau_a < 1.0:
            raise ValueError("plateau fraction must be in (0, 1)")

    @classmethod
    def parse(cls, text):
        """Parse 'poly' or 'plateau:<fraction>'."""
        if text == "poly":
            return cls("poly")
        if text.startswith("plateau:"):
            return cls("plateau", float(text.split(":", 1)[1]))
        raise ValueError(f"unknown profile spec {text!r}")

    def describe(self):
        return "poly" if self.kind == "poly" else f"plateau:{self.plateau_a:g}"

    @property
    def kind_int(self):
        return 0 if self.kind == "poly" else 1

    def __call__(self, s):
        return kernels.profile_value(s, self.kind_int, self.plateau_a)
