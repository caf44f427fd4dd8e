#pragma once

#include <array>
#include <atomic>
#include <cstddef>
#include <functional>
#include <span>

namespace fraccal {

/// Rectangular block of lattice indices; dimension 1 ignores the second axis.
struct Box {
  std::array<int, 2> lo{0, 0};
  std::array<int, 2> len{1, 1};

  std::size_t count(int dim) const {
    return dim == 1 ? static_cast<std::size_t>(len[0]) : static_cast<std::size_t>(len[0]) * len[1];
  }
};

/// Process-wide FFT/apply counters exposed for performance reporting.
struct ConvolutionCounters {
  std::atomic<long long> applies{0};
  std::atomic<long long> ffts{0};
};
ConvolutionCounters& convolution_counters();

/// Translation-invariant lattice operator out(i) = sum_k K(i - k) in(k)
/// for k in an input box and i in an output box, evaluated through a
/// zero-padded FFT (circulant embedding). Sizes are rounded up to powers of
/// two. Immutable after construction; apply() allocates its own workspace so
/// concurrent calls are safe.
class LatticeConvolution {
 public:
  using Kernel = std::function<double(int di, int dj)>;

  LatticeConvolution(int dim, Box in, Box out, const Kernel& kernel);
  ~LatticeConvolution();
  LatticeConvolution(const LatticeConvolution&) = delete;
  LatticeConvolution& operator=(const LatticeConvolution&) = delete;

  int dim() const { return dim_; }
  const Box& in_box() const { return in_; }
  const Box& out_box() const { return out_; }
  std::array<int, 2> fft_size() const { return {p0_, p1_}; }

  void apply(std::span<const double> in, std::span<double> out) const;
  /// in(k) = sum_i K(i - k) out(i).
  void apply_transpose(std::span<const double> out, std::span<double> in) const;

 private:
  void forward_fft(double* real, void* spec) const;
  void inverse_fft(void* spec, double* real) const;

  int dim_;
  Box in_;
  Box out_;
  int p0_ = 1;
  int p1_ = 1;
  std::size_t spec_count_ = 0;
  void* spectrum_ = nullptr;  // fftw_complex[spec_count_], already scaled by 1/(p0 p1)
  void* plan_r2c_ = nullptr;
  void* plan_c2r_ = nullptr;
};

}  // namespace fraccal
