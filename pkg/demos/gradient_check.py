#!/usr/bin/env python3
"""Finite-difference verification of every analytic gradient, plus a
deliberate corruption to prove the checker can actually fail."""

from relish.gradsuite import BASELINE_TOL, HEAD_TOL, run_grad_suite

suite = run_grad_suite()
print(f"{'case':<34} {'worst rel err':>14} {'tolerance':>10}")
for name, worst, tol, ok in suite.rows:
    print(f"{name:<34} {worst:>14.3e} {tol:>10.0e}  {'ok' if ok else 'FAIL'}")
assert suite.passed
print(f"\nall {len(suite.rows)} checks pass"
      f" (head tol {HEAD_TOL:g}, baseline tol {BASELINE_TOL:g})")

# sanity of the checker itself: flip the sign of one analytic gradient
# and the finite-difference comparison must notice and name it
broken = run_grad_suite(corrupt_param="block0.attn.Wq")
assert not broken.passed
print(f"\nwith a sign-flipped gradient the suite reports:\n  {broken.failure}")
