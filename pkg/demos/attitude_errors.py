"""
Attitude errors on SO(3)
========================

How the configuration error, the attitude error vector and the transport
matrix behave as the vehicle rotates away from a commanded attitude.
"""

import numpy as np

from slicequad.geom3 import attitude_errors, psi_R, rot_axis_angle, transport_matrix

# sweep a rotation about a fixed axis from 0 to 180 degrees
axis = np.array([1.0, 1.0, 0.0])
Rc = np.eye(3)
z = np.zeros(3)

print(" angle   psi     |e_R|   sqrt(psi(2-psi))  |Y|")
for deg in range(0, 181, 30):
    R = rot_axis_angle(axis, np.radians(deg))
    psi = psi_R(R, Rc)
    e_R, _ = attitude_errors(R, Rc, z, z)
    Y = transport_matrix(R, Rc)
    print("%5d  %6.3f  %6.3f   %6.3f            %5.3f"
          % (deg, psi, np.linalg.norm(e_R), np.sqrt(psi * (2 - psi)), np.linalg.norm(Y, 2)))

# |e_R| peaks at 90 degrees and vanishes again upside down, which is why
# the attitude loop only gives almost-global convergence
