# Coding schemes: placement, shuffles, erasure codes, straggler models
