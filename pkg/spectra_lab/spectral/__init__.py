# Eigensolvers and functional calculus
