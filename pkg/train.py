#!/usr/bin/env python3
"""
S-WGAN Inpainting - Training Script

Trains with data/config/desk.json unless another config is given:

    python train.py [--config path/to/run.json] [--resume checkpoint.swgn]
"""

import sys

from swgan_inpaint.cli import main as cli_main

DEFAULT_CONFIG = "data/config/desk.json"


def main():
    """Main entry point for training the generator and critic"""
    print("=== S-WGAN Inpainting - Training ===\n")
    argv = sys.argv[1:]
    if "--config" not in argv:
        argv = ["--config", DEFAULT_CONFIG] + argv
    code = cli_main(["train"] + argv)
    if code == 0:
        print("\n✅ Training completed successfully!")
    else:
        print(f"\n❌ Training failed (exit code {code})")
    return code


if __name__ == "__main__":
    sys.exit(main())
