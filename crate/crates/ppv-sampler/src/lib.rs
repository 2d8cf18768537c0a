//! Monte Carlo reference interpreter and statistical assertion checker.
