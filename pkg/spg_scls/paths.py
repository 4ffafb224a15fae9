import os
import pathlib

INSTANCE_SUFFIX = ".spm"
DESCRIPTOR_SUFFIX = ".json"


def instance_stem(descriptor: dict) -> str:
    """Only use these characters: (+-._A-Za-z0-9)"""

    return (f"spg_m{descriptor['m']}_n{descriptor['n']}_d{descriptor['density']:g}"
            f"_g{descriptor['gamma']:g}_{descriptor['scenario']}_s{descriptor['seed']}")


def instance_paths(out_dir: str | os.PathLike, stem: str) -> tuple[pathlib.Path, pathlib.Path]:
    out_dir = pathlib.Path(out_dir)

    return out_dir / f"{stem}{INSTANCE_SUFFIX}", out_dir / f"{stem}{DESCRIPTOR_SUFFIX}"


def descriptor_path_for(instance_path: str | os.PathLike) -> pathlib.Path:
    return pathlib.Path(instance_path).with_suffix(DESCRIPTOR_SUFFIX)
