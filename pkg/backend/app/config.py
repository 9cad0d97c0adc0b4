"""
Runtime settings, read from the environment.
"""
from __future__ import annotations

import os
from dataclasses import dataclass


@dataclass(frozen=True)
class Settings:
    database_url: str
    workers: int
    cap_extra: int
    eps_steps: int

    def default_cap(self, n: int) -> int:
        """Polynomial-degree cap for an n-dimensional fan (cohomological 2n + cap_extra)."""
        return n + max(self.cap_extra, 0) // 2


def load_settings() -> Settings:
    # Empty strings count as unset, the same way DATABASE_URL is treated.
    return Settings(
        database_url=os.getenv("DATABASE_URL") or "sqlite:////tmp/fan_ih.db",
        workers=int(os.getenv("FAN_IH_WORKERS") or 4),
        cap_extra=int(os.getenv("FAN_IH_DEFAULT_CAP_EXTRA") or 2),
        eps_steps=int(os.getenv("FAN_IH_EPS_STEPS") or 8),
    )


settings = load_settings()
