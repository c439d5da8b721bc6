"""Python access to the software ICS testbed core."""

import json as _json

from . import _core
from ._core import (
    ArgumentError,
    ConfigError,
    FramingError,
    ParseError,
    ProtocolError,
    encode_read_bits_response,
    encode_read_registers_response,
    encode_read_request,
    encode_write_coil,
    replay,
    verify_log,
)

__all__ = [
    "ArgumentError",
    "ConfigError",
    "FramingError",
    "ParseError",
    "ProtocolError",
    "decode_adu",
    "density",
    "encode_read_bits_response",
    "encode_read_registers_response",
    "encode_read_request",
    "encode_write_coil",
    "replay",
    "run_scenario",
    "verify_log",
]


def decode_adu(data: bytes, response: bool = False) -> dict:
    """Decode one Modbus/TCP ADU into its header and PDU fields."""
    return _json.loads(_core.decode_adu_json(data, response))


def run_scenario(config_path, output_dir=None, seed=None) -> dict:
    """Run a scenario headless and return its summary."""
    out = None if output_dir is None else str(output_dir)
    return _json.loads(_core.run_scenario_json(str(config_path), out, seed))


def density(log_path) -> dict:
    """Per-device packet rate density of a written event log."""
    return _json.loads(_core.density_json(str(log_path)))
