//! Inert-parameter continuation of the descended family.
