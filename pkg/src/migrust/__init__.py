"""Documentation-guided multi-agent orchestrator for C-to-Rust migration."""

__version__ = "0.1.0"
