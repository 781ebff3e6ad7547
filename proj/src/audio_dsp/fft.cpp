#include "fft.hpp"

#include <bit>
#include <cmath>
#include <numbers>

namespace emotalk::dsp::detail {

FftPlan::FftPlan(std::size_t n) : n_(n) {
  const bool pow2 = std::has_single_bit(n);
  m_ = pow2 ? n : std::bit_ceil(2 * n - 1);

  twiddles_.resize(m_ / 2);
  for (std::size_t k = 0; k < m_ / 2; ++k) {
    const double a = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(m_);
    twiddles_[k] = {std::cos(a), std::sin(a)};
  }
  const int bits = std::countr_zero(m_);
  bitrev_.resize(m_);
  for (std::size_t i = 0; i < m_; ++i) {
    std::size_t r = 0;
    for (int b = 0; b < bits; ++b) r |= ((i >> b) & 1u) << (bits - 1 - b);
    bitrev_[i] = r;
  }

  if (!pow2) {
    // w_k = exp(-i pi k^2 / n); k^2 reduced mod 2n keeps the angle small.
    chirp_.resize(n_);
    for (std::size_t k = 0; k < n_; ++k) {
      const auto k2 = static_cast<double>((k * k) % (2 * n_));
      const double a = -std::numbers::pi * k2 / static_cast<double>(n_);
      chirp_[k] = {std::cos(a), std::sin(a)};
    }
    chirp_filter_.assign(m_, {0.0, 0.0});
    chirp_filter_[0] = std::conj(chirp_[0]);
    for (std::size_t k = 1; k < n_; ++k) {
      chirp_filter_[k] = std::conj(chirp_[k]);
      chirp_filter_[m_ - k] = std::conj(chirp_[k]);
    }
    radix2(chirp_filter_);
  }
}

void FftPlan::radix2(std::span<std::complex<double>> a) const {
  for (std::size_t i = 0; i < m_; ++i) {
    if (i < bitrev_[i]) std::swap(a[i], a[bitrev_[i]]);
  }
  for (std::size_t len = 2; len <= m_; len <<= 1) {
    const std::size_t half = len / 2;
    const std::size_t stride = m_ / len;
    for (std::size_t start = 0; start < m_; start += len) {
      for (std::size_t j = 0; j < half; ++j) {
        const auto t = twiddles_[j * stride] * a[start + j + half];
        a[start + j + half] = a[start + j] - t;
        a[start + j] += t;
      }
    }
  }
}

void FftPlan::forward(std::span<std::complex<double>> data) const {
  if (chirp_.empty()) {
    radix2(data);
    return;
  }
  std::vector<std::complex<double>> work(m_, {0.0, 0.0});
  for (std::size_t k = 0; k < n_; ++k) work[k] = data[k] * chirp_[k];
  radix2(work);
  for (std::size_t k = 0; k < m_; ++k) work[k] *= chirp_filter_[k];
  // Inverse through the forward transform: conj(FFT(conj(x))) / m.
  for (auto& v : work) v = std::conj(v);
  radix2(work);
  const double scale = 1.0 / static_cast<double>(m_);
  for (std::size_t k = 0; k < n_; ++k) data[k] = std::conj(work[k]) * scale * chirp_[k];
}

}  // namespace emotalk::dsp::detail
