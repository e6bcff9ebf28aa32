"""
Checking gain conditions
========================

The stability argument asks for a small cross-term constant c_R and a
small coupling loss. This walks through both checks for a few gain sets.
"""

from slicequad import lyapunov as lyap
from slicequad.sanm import Gains

# the c_R bound is the smallest of four terms
for k_R, k_W in [(9.0, 4.0), (250.0, 32.0), (9.0, 1e6)]:
    v = lyap.check_cR_bound(k_R, k_W, 1.0)
    print("k_R=%-6g k_Omega=%-8g bound %.4g (binding %s), c_R=1 %s"
          % (k_R, k_W, v.bound, v.binding, "passes" if v.passed else "fails"))

# the 5x5 decay matrix stays positive definite until the coupling loss
# crosses its bound; both tests give the same verdict
g = Gains(k_R=9.0, k_Omega=4.0)
P = lyap.lyapunov_matrices(g)
for eps in (0.1, 1.0, 3.0, 10.0):
    a = lyap.assemble_M(g.k_R, g.k_Omega, g.c_R, P, g.Q, 1.5, g.m_max, eps, eps)
    print("eps_u=eps_c=%-5g Xi %.3g / %.3g  schur %-5s eig %-5s min eig %.2e"
          % (eps, a.Xi, a.Xi_bound, a.schur_verdict, a.eig_verdict, a.eigenvalues[0]))
