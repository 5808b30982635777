"""Walk the peg tip through the contact regimes and print the forces.

Shows the four zones the analytic contact model distinguishes: free space
above the surface, the flat table outside the hole, free insertion inside
the bore clearance, and wall contact when the lateral offset exceeds the
clearance. Also demonstrates the collision flag tripping once the force
magnitude passes the limit.
"""

import numpy as np

from pegx import sim


def row(label, pos, vel=(0, 0, 0)):
    geo = sim.default_geometry()
    force, collided = sim.contact_forces(np.array(pos, float), np.array(vel, float), geo)
    flag = "COLLISION" if collided else ""
    print(f"{label:38s} pos z={pos[2]:+.4f}  lateral={np.hypot(pos[0], pos[1])*1000:5.1f}mm"
          f"  F=({force[0]:7.2f},{force[1]:7.2f},{force[2]:7.2f}) N  {flag}")


def main():
    geo = sim.default_geometry()
    print(f"hole radius {geo.hole_radius*1000:.0f} mm, peg radius {geo.peg_radius*1000:.0f} mm,"
          f" clearance {geo.clearance*1000:.0f} mm")
    print(f"surface at z={geo.surface_z:.3f} m, full insertion at z={geo.bottom_z:.3f} m,"
          f" collision limit {geo.collision_force_limit:.0f} N")
    print()
    row("hovering above the surface", (0.01, 0.0, 0.025))
    row("resting on the table", (0.01, 0.0, 0.0199))
    row("pressed 1 mm into the table", (0.01, 0.0, 0.019))
    row("pressed 12 mm into the table", (0.01, 0.0, 0.008))
    row("descending into the table", (0.01, 0.0, 0.019), vel=(0, 0, -0.2))
    print()
    row("centered inside the bore", (0.0, 0.0, 0.01))
    row("0.5 mm off axis inside the bore", (0.0005, 0.0, 0.01))
    row("brushing the bore wall", (0.0015, 0.0, 0.01))
    row("hard against the bore wall", (0.004, 0.0, 0.01))
    row("tip centered on the rim", (0.006, 0.0, 0.01))
    row("at the hole bottom", (0.0, 0.0, 0.0))
    row("pushed below the bottom", (0.0, 0.0, -0.002))


if __name__ == "__main__":
    main()
