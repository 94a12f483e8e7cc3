"""Memory-driven dual-mode image quality assessment."""

from ._mqaf import (  # noqa: F401
    ConfigError,
    __version__,
    apply_distortion,
    default_config,
    evaluate,
    generate_corpus,
    gmad,
    plcc,
    psnr,
    score,
    selftest,
    srcc,
    train,
)

__all__ = [
    "ConfigError",
    "__version__",
    "apply_distortion",
    "default_config",
    "evaluate",
    "generate_corpus",
    "gmad",
    "plcc",
    "psnr",
    "score",
    "selftest",
    "srcc",
    "train",
]
