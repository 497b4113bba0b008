"""
Network layers, the S-WGAN models and the parameter container format
"""

from .critic import Critic, clip_critic_weights, critic_forward
from .features import FeatureExtractor, extract_features
from .generator import Generator, build_generator, generator_forward
from .layers import Conv2dLayer, LayerParamSet, Linear, Module, conv2d_dilated

__all__ = [
    'Conv2dLayer', 'Critic', 'FeatureExtractor', 'Generator', 'LayerParamSet', 'Linear',
    'Module', 'build_generator', 'clip_critic_weights', 'conv2d_dilated', 'critic_forward',
    'extract_features', 'generator_forward',
]
