#pragma once

#include <vector>

namespace rbsde::detail {

/// Solves a tridiagonal system in place (Thomas algorithm, no pivoting).
/// Row i reads lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]; the solution
/// overwrites `rhs`. `diag` is used as scratch.
void solve_tridiagonal(const std::vector<double>& lower, std::vector<double>& diag,
                       const std::vector<double>& upper, std::vector<double>& rhs);

}  // namespace rbsde::detail
