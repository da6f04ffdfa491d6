//! Composite operator constructions on the descended families.
