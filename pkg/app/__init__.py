"""HTTP service exposing primitive inference"""
