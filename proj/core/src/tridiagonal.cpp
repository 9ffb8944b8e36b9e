#include "tridiagonal.hpp"

#include "roughbsde/errors.hpp"

namespace rbsde::detail {

void solve_tridiagonal(const std::vector<double>& lower, std::vector<double>& diag,
                       const std::vector<double>& upper, std::vector<double>& rhs) {
    const std::size_t n = diag.size();
    for (std::size_t i = 1; i < n; ++i) {
        if (diag[i - 1] == 0.0) throw NumericError("singular tridiagonal system");
        const double m = lower[i] / diag[i - 1];
        diag[i] -= m * upper[i - 1];
        rhs[i] -= m * rhs[i - 1];
    }
    if (diag[n - 1] == 0.0) throw NumericError("singular tridiagonal system");
    rhs[n - 1] /= diag[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) {
        rhs[i] = (rhs[i] - upper[i] * rhs[i + 1]) / diag[i];
    }
}

}  // namespace rbsde::detail
