"""
乱数シードの導出
"""
import numpy as np


def derive_seed(seed: int, *streams: int) -> int:
    """
    基底シードとストリーム番号から独立な子シードを導出

    Args:
        seed (int): 基底シード
        *streams (int): 用途ごとのストリーム番号（段階・反復番号など）

    Returns:
        int: 導出されたシード
    """
    sequence = np.random.SeedSequence([int(seed), *[int(s) for s in streams]])
    return int(sequence.generate_state(1, dtype=np.uint32)[0])


def make_rng(seed: int) -> np.random.Generator:
    """シードから乱数生成器を作成"""
    return np.random.default_rng(int(seed))
