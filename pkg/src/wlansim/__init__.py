"""Discrete-event simulator of TCP/UDP over an 802.11 DCF cell with a
burst-error channel and channel-adaptive Reed-Solomon FEC."""
from ._kernels import BACKEND
from .channel import ChannelParams, ChannelProcess, FecConfig
from .engine import RngStreams, Simulator
from .mac import MacParams, Medium
from .transport import TcpConnection, TcpParams, UdpFlow

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ChannelParams",
    "ChannelProcess",
    "FecConfig",
    "MacParams",
    "Medium",
    "RngStreams",
    "Simulator",
    "TcpConnection",
    "TcpParams",
    "UdpFlow",
]
