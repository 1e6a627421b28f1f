#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace parobs {

/// Symmetric positive definite banded matrix with in-place Cholesky
/// factorization. Only the lower band is stored, row-major:
/// entry (i, j) with i - bw <= j <= i lives at row i, slot j - i + bw.
class BandedCholesky {
  public:
    BandedCholesky(int n, int bandwidth)
        : n_(n), bw_(bandwidth), a_(static_cast<std::size_t>(n) * (bandwidth + 1), 0.0) {
        if (n < 1 || bandwidth < 0) throw std::invalid_argument("BandedCholesky: bad shape");
    }

    double& at(int i, int j) {
        return a_[static_cast<std::size_t>(i) * (bw_ + 1) + (j - i + bw_)];
    }
    double at(int i, int j) const {
        return a_[static_cast<std::size_t>(i) * (bw_ + 1) + (j - i + bw_)];
    }

    /// Factor A = L L^T in place; throws on loss of positive definiteness.
    void factor() {
        for (int i = 0; i < n_; ++i) {
            const int j0 = std::max(0, i - bw_);
            for (int j = j0; j <= i; ++j) {
                double s = at(i, j);
                const int k0 = std::max(j0, j - bw_);
                for (int k = k0; k < j; ++k) s -= at(i, k) * at(j, k);
                if (i == j) {
                    if (!(s > 0.0))
                        throw std::runtime_error("BandedCholesky: matrix not positive definite");
                    at(i, i) = std::sqrt(s);
                } else {
                    at(i, j) = s / at(j, j);
                }
            }
        }
        factored_ = true;
    }

    /// Solve A x = b with the stored factor; b is overwritten by x.
    void solve(std::span<double> b) const {
        if (!factored_) throw std::logic_error("BandedCholesky: factor() not called");
        for (int i = 0; i < n_; ++i) {
            double s = b[i];
            const int k0 = std::max(0, i - bw_);
            for (int k = k0; k < i; ++k) s -= at(i, k) * b[k];
            b[i] = s / at(i, i);
        }
        for (int i = n_ - 1; i >= 0; --i) {
            double s = b[i];
            const int k1 = std::min(n_ - 1, i + bw_);
            for (int k = i + 1; k <= k1; ++k) s -= at(k, i) * b[k];
            b[i] = s / at(i, i);
        }
    }

    int size() const { return n_; }
    int bandwidth() const { return bw_; }

  private:
    int n_;
    int bw_;
    bool factored_ = false;
    std::vector<double> a_;
};

} // namespace parobs
