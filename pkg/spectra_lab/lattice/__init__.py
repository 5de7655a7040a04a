# Grids, grid functions, measures and operator assembly
