//! Input builders shared by the benchmark targets.
