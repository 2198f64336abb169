#pragma once

#include <complex>
#include <stdexcept>
#include <vector>

namespace mse {

extern "C" {
void zgbtrf_(const int* m, const int* n, const int* kl, const int* ku, std::complex<double>* ab, const int* ldab,
             int* ipiv, int* info);
void zgbtrs_(const char* trans, const int* n, const int* kl, const int* ku, const int* nrhs,
             const std::complex<double>* ab, const int* ldab, const int* ipiv, std::complex<double>* b, const int* ldb,
             int* info, int trans_len);
}

/// Complex banded LU (LAPACK zgbtrf/zgbtrs). Column-major band storage with
/// kl extra rows for pivot fill-in.
class BandedLU {
  public:
    void reset(int n, int kl, int ku) {
        n_ = n;
        kl_ = kl;
        ku_ = ku;
        ldab_ = 2 * kl + ku + 1;
        ab_.assign(static_cast<std::size_t>(ldab_) * n, {0.0, 0.0});
        ipiv_.assign(n, 0);
        factored_ = false;
    }

    /// Entry A(row, col); valid for |row - col| <= min(kl, ku).
    std::complex<double>& at(int row, int col) {
        return ab_[static_cast<std::size_t>(col) * ldab_ + (kl_ + ku_ + row - col)];
    }

    void factor() {
        int info = 0;
        zgbtrf_(&n_, &n_, &kl_, &ku_, ab_.data(), &ldab_, ipiv_.data(), &info);
        if (info != 0) throw std::runtime_error("banded LU factorization failed, info=" + std::to_string(info));
        factored_ = true;
    }

    void solve(std::complex<double>* b) const {
        if (!factored_) throw std::logic_error("BandedLU::solve before factor");
        int info = 0, nrhs = 1;
        zgbtrs_("N", &n_, &kl_, &ku_, &nrhs, ab_.data(), &ldab_, ipiv_.data(), b, &n_, &info, 1);
        if (info != 0) throw std::runtime_error("banded solve failed, info=" + std::to_string(info));
    }

    bool factored() const { return factored_; }
    int size() const { return n_; }

  private:
    int n_ = 0, kl_ = 0, ku_ = 0, ldab_ = 0;
    std::vector<std::complex<double>> ab_;
    std::vector<int> ipiv_;
    bool factored_ = false;
};

}  // namespace mse
