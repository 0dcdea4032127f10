"""Scheme registry keyed by the external interface names.

Plain names map to singleton scheme objects; the virtual-users wrapper is
addressed as ``vu(<inner>)``, e.g. ``vu(ht1)``.
"""

from __future__ import annotations

from ..errors import ConfigurationError
from .base import Scheme
from .nonprivate import FlexScheme, Ht1Scheme, Ht2Scheme, Ht3Scheme, YmaPlusScheme
from .private import (
    Ht1PkScheme,
    Ht3PkScheme,
    HtVuScheme,
    PkPlusScheme,
    VirtualUsersScheme,
)

_BASE: dict[str, Scheme] = {}
for _scheme in (
    YmaPlusScheme(),
    Ht1Scheme(),
    Ht2Scheme(),
    Ht3Scheme(),
    FlexScheme(),
    PkPlusScheme(),
    Ht1PkScheme(),
    Ht3PkScheme(),
    HtVuScheme(),
):
    _BASE[_scheme.name] = _scheme


def scheme_names() -> list[str]:
    return sorted(_BASE) + ["vu(<inner>)"]


def get_scheme(name: str) -> Scheme:
    name = name.strip()
    if name.startswith("vu(") and name.endswith(")"):
        inner = get_scheme(name[3:-1])
        if inner.is_private:
            raise ConfigurationError(f"virtual-users wrapper needs a non-private inner scheme, got {inner.name}")
        return VirtualUsersScheme(inner)
    try:
        return _BASE[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown scheme {name!r}; known: {', '.join(scheme_names())}"
        ) from None
