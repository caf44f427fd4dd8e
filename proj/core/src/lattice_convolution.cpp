#include "fraccal/lattice_convolution.hpp"

#include <fftw3.h>

#include <algorithm>
#include <mutex>
#include <stdexcept>
#include <vector>

namespace fraccal {

namespace {

std::mutex& plan_mutex() {
  static std::mutex mu;
  return mu;
}

int next_pow2(int n) {
  int p = 1;
  while (p < n) p <<= 1;
  return p;
}

struct RealBuffer {
  explicit RealBuffer(std::size_t n) : data(static_cast<double*>(fftw_malloc(sizeof(double) * n))) {
    if (!data) throw std::bad_alloc();
    std::fill(data, data + n, 0.0);
  }
  ~RealBuffer() { fftw_free(data); }
  RealBuffer(const RealBuffer&) = delete;
  RealBuffer& operator=(const RealBuffer&) = delete;
  double* data;
};

struct ComplexBuffer {
  explicit ComplexBuffer(std::size_t n)
      : data(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n))) {
    if (!data) throw std::bad_alloc();
  }
  ~ComplexBuffer() { fftw_free(data); }
  ComplexBuffer(const ComplexBuffer&) = delete;
  ComplexBuffer& operator=(const ComplexBuffer&) = delete;
  fftw_complex* data;
};

}  // namespace

ConvolutionCounters& convolution_counters() {
  static ConvolutionCounters c;
  return c;
}

LatticeConvolution::LatticeConvolution(int dim, Box in, Box out, const Kernel& kernel)
    : dim_(dim), in_(in), out_(out) {
  if (dim != 1 && dim != 2) throw std::invalid_argument("convolution dimension must be 1 or 2");
  p0_ = next_pow2(in.len[0] + out.len[0] - 1);
  p1_ = dim == 2 ? next_pow2(in.len[1] + out.len[1] - 1) : 1;
  const std::size_t real_count = static_cast<std::size_t>(p0_) * p1_;
  spec_count_ = static_cast<std::size_t>(p0_ / 2 + 1) * p1_;

  RealBuffer kern(real_count);
  const int shift0 = out.lo[0] - in.lo[0];
  const int shift1 = out.lo[1] - in.lo[1];
  const int m1lo = dim == 2 ? -(in.len[1] - 1) : 0;
  const int m1hi = dim == 2 ? out.len[1] - 1 : 0;
  for (int m1 = m1lo; m1 <= m1hi; ++m1) {
    const int r1 = ((m1 % p1_) + p1_) % p1_;
    for (int m0 = -(in.len[0] - 1); m0 <= out.len[0] - 1; ++m0) {
      const int r0 = ((m0 % p0_) + p0_) % p0_;
      kern.data[static_cast<std::size_t>(r1) * p0_ + r0] = kernel(shift0 + m0, dim == 2 ? shift1 + m1 : 0);
    }
  }

  auto* spectrum = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * spec_count_));
  if (!spectrum) throw std::bad_alloc();
  spectrum_ = spectrum;
  {
    std::lock_guard lock(plan_mutex());
    RealBuffer scratch_r(real_count);
    ComplexBuffer scratch_c(spec_count_);
    if (dim == 1) {
      plan_r2c_ = fftw_plan_dft_r2c_1d(p0_, scratch_r.data, scratch_c.data, FFTW_ESTIMATE);
      plan_c2r_ = fftw_plan_dft_c2r_1d(p0_, scratch_c.data, scratch_r.data, FFTW_ESTIMATE);
    } else {
      plan_r2c_ = fftw_plan_dft_r2c_2d(p1_, p0_, scratch_r.data, scratch_c.data, FFTW_ESTIMATE);
      plan_c2r_ = fftw_plan_dft_c2r_2d(p1_, p0_, scratch_c.data, scratch_r.data, FFTW_ESTIMATE);
    }
  }
  forward_fft(kern.data, spectrum);
  const double scale = 1.0 / static_cast<double>(real_count);
  for (std::size_t k = 0; k < spec_count_; ++k) {
    spectrum[k][0] *= scale;
    spectrum[k][1] *= scale;
  }
}

LatticeConvolution::~LatticeConvolution() {
  std::lock_guard lock(plan_mutex());
  if (plan_r2c_) fftw_destroy_plan(static_cast<fftw_plan>(plan_r2c_));
  if (plan_c2r_) fftw_destroy_plan(static_cast<fftw_plan>(plan_c2r_));
  fftw_free(spectrum_);
}

void LatticeConvolution::forward_fft(double* real, void* spec) const {
  fftw_execute_dft_r2c(static_cast<fftw_plan>(plan_r2c_), real, static_cast<fftw_complex*>(spec));
  convolution_counters().ffts.fetch_add(1, std::memory_order_relaxed);
}

void LatticeConvolution::inverse_fft(void* spec, double* real) const {
  // c2r destroys its input; callers pass scratch spectra only.
  fftw_execute_dft_c2r(static_cast<fftw_plan>(plan_c2r_), static_cast<fftw_complex*>(spec), real);
  convolution_counters().ffts.fetch_add(1, std::memory_order_relaxed);
}

void LatticeConvolution::apply(std::span<const double> in, std::span<double> out) const {
  if (in.size() != in_.count(dim_) || out.size() != out_.count(dim_))
    throw std::invalid_argument("convolution operand size mismatch");
  const std::size_t real_count = static_cast<std::size_t>(p0_) * p1_;
  RealBuffer buf(real_count);
  ComplexBuffer spec(spec_count_);
  const int rows_in = dim_ == 2 ? in_.len[1] : 1;
  for (int r = 0; r < rows_in; ++r)
    std::copy_n(in.data() + static_cast<std::size_t>(r) * in_.len[0], in_.len[0],
                buf.data + static_cast<std::size_t>(r) * p0_);
  forward_fft(buf.data, spec.data);
  const auto* k = static_cast<const fftw_complex*>(spectrum_);
  for (std::size_t t = 0; t < spec_count_; ++t) {
    const double re = spec.data[t][0] * k[t][0] - spec.data[t][1] * k[t][1];
    const double im = spec.data[t][0] * k[t][1] + spec.data[t][1] * k[t][0];
    spec.data[t][0] = re;
    spec.data[t][1] = im;
  }
  inverse_fft(spec.data, buf.data);
  const int rows_out = dim_ == 2 ? out_.len[1] : 1;
  for (int r = 0; r < rows_out; ++r)
    std::copy_n(buf.data + static_cast<std::size_t>(r) * p0_, out_.len[0],
                out.data() + static_cast<std::size_t>(r) * out_.len[0]);
  convolution_counters().applies.fetch_add(1, std::memory_order_relaxed);
}

void LatticeConvolution::apply_transpose(std::span<const double> out, std::span<double> in) const {
  if (in.size() != in_.count(dim_) || out.size() != out_.count(dim_))
    throw std::invalid_argument("convolution operand size mismatch");
  const std::size_t real_count = static_cast<std::size_t>(p0_) * p1_;
  RealBuffer buf(real_count);
  ComplexBuffer spec(spec_count_);
  const int rows_out = dim_ == 2 ? out_.len[1] : 1;
  for (int r = 0; r < rows_out; ++r)
    std::copy_n(out.data() + static_cast<std::size_t>(r) * out_.len[0], out_.len[0],
                buf.data + static_cast<std::size_t>(r) * p0_);
  forward_fft(buf.data, spec.data);
  const auto* k = static_cast<const fftw_complex*>(spectrum_);
  for (std::size_t t = 0; t < spec_count_; ++t) {
    // multiply by conj(K)
    const double re = spec.data[t][0] * k[t][0] + spec.data[t][1] * k[t][1];
    const double im = spec.data[t][1] * k[t][0] - spec.data[t][0] * k[t][1];
    spec.data[t][0] = re;
    spec.data[t][1] = im;
  }
  inverse_fft(spec.data, buf.data);
  const int rows_in = dim_ == 2 ? in_.len[1] : 1;
  for (int r = 0; r < rows_in; ++r)
    std::copy_n(buf.data + static_cast<std::size_t>(r) * p0_, in_.len[0],
                in.data() + static_cast<std::size_t>(r) * in_.len[0]);
  convolution_counters().applies.fetch_add(1, std::memory_order_relaxed);
}

}  // namespace fraccal
