"""Write contour plots of the primal and dual landscapes of ex1 to the current directory."""
from cdtriality import example_catalog
from cdtriality.grid import Axis, contour_svg, evaluate_grid

inst = example_catalog("ex1").instance
primal = evaluate_grid(inst, "primal", [Axis(0, "x1", -2, 2), Axis(1, "x2", -2, 2)], 161)
dual = evaluate_grid(inst, "dual", [Axis(0, "tau1", 0.4, 3), Axis(1, "sigma1", -0.99, 2)], 161)
for name, dump in (("ex1_primal.svg", primal), ("ex1_dual.svg", dual)):
    with open(name, "w", encoding="utf-8") as fh:
        fh.write(contour_svg(dump))
    print("wrote", name)
