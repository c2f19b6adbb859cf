//! Synthetic receiver link simulation (stub).
