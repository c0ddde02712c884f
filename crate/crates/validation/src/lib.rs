//! Host crate for the `acceptance` test target. Kept separate so that the
//! rest of the workspace suite runs before it.
