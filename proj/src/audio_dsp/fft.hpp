#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace emotalk::dsp::detail {

/// Forward complex DFT of a fixed size. Powers of two use an iterative
/// radix-2 transform; other sizes go through Bluestein's chirp-z.
class FftPlan {
 public:
  explicit FftPlan(std::size_t n);

  std::size_t size() const noexcept { return n_; }

  /// In place, unnormalized, X[k] = sum x[j] exp(-2 pi i j k / n).
  void forward(std::span<std::complex<double>> data) const;

 private:
  void radix2(std::span<std::complex<double>> data) const;

  std::size_t n_;
  std::size_t m_;  // radix-2 length actually transformed
  std::vector<std::complex<double>> twiddles_;
  std::vector<std::size_t> bitrev_;
  // Bluestein state (empty when n_ is a power of two).
  std::vector<std::complex<double>> chirp_;
  std::vector<std::complex<double>> chirp_filter_;
};

}  // namespace emotalk::dsp::detail
