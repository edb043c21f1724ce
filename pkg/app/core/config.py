from dotenv import load_dotenv
from pydantic_settings import BaseSettings, SettingsConfigDict

load_dotenv()


class Config(BaseSettings):
    model_config = SettingsConfigDict(env_prefix="KTSOLVE_")

    debug: bool = False
    log_level: str = "INFO"

    # Solver defaults; problem files and CLI flags override these
    epsilon: float = 0.1
    gamma: float = 1.0
    mu: float = 1.0
    lambda_haugazeau: float = 1.0
    lambda_fejer: float = 1.8
    max_iters: int = 5000
    tau_tol: float = 1e-16
    dist_tol: float = 1e-10
    stall_window: int = 5

    # Q projector case classification
    rho_tol: float = 1e-12
    cs_clamp: float = 1e-14

    block_workers: int = 1

    oracle_grid_points: int = 2001
    oracle_refinements: int = 2
    oracle_half_width: float = 8.0
    oracle_max_widenings: int = 40
    membership_tol: float = 1e-9

    @property
    def effective_log_level(self) -> str:
        return "DEBUG" if self.debug else self.log_level.upper()


config = Config()
