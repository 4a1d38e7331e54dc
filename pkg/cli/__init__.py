"""Command-line entry point: generate, train, eval, infer, gradcheck, robustness"""
