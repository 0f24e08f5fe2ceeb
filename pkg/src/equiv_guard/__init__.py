"""equiv_guard - detection of EVM-inequivalent code smells in Solidity contracts."""

__version__ = "0.1.0"
