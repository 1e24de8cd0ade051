"""Radial solutions of Δu + |x|^α e^u = 0 and Δ²u = |x|^α e^u."""
