"""
S-WGAN Facial Inpainting - Main Package
"""

__version__ = "1.0.0"
__description__ = "Symmetric-skip Wasserstein GAN for facial image inpainting, on a numpy autograd core"
