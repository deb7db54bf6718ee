#pragma once

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <mutex>

#include "qnd/errors.hpp"

namespace qnd {

// In-place complex FFT of fixed size backed by FFTW. Plans are created with
// FFTW_ESTIMATE: the plan then depends only on the transform size, so equal
// inputs give bit-identical outputs across runs and machines, which the
// reproducibility contract of the CLI relies on. Plan creation is serialized
// (FFTW's planner is not thread-safe); execution is concurrent-safe because
// every instance owns its plan and buffer.
class Fft1D {
 public:
  explicit Fft1D(std::size_t n) : n_(n) {
    require(n >= 2, ErrKind::invalid_parameter, "FFT size too small");
    buf_ = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n));
    require(buf_ != nullptr, ErrKind::io, "fftw_malloc failed");
    std::lock_guard<std::mutex> lock(planner_mutex());
    fwd_ = fftw_plan_dft_1d(static_cast<int>(n), buf_, buf_, FFTW_FORWARD, FFTW_ESTIMATE);
    bwd_ = fftw_plan_dft_1d(static_cast<int>(n), buf_, buf_, FFTW_BACKWARD, FFTW_ESTIMATE);
    if (!fwd_ || !bwd_) {
      fftw_free(buf_);
      raise(ErrKind::accuracy, "fftw plan creation failed");
    }
  }

  ~Fft1D() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(bwd_);
    fftw_free(buf_);
  }

  Fft1D(const Fft1D&) = delete;
  Fft1D& operator=(const Fft1D&) = delete;

  std::size_t size() const { return n_; }

  std::complex<double>* data() { return reinterpret_cast<std::complex<double>*>(buf_); }
  const std::complex<double>* data() const {
    return reinterpret_cast<const std::complex<double>*>(buf_);
  }

  void forward() { fftw_execute(fwd_); }   // unnormalized
  void backward() { fftw_execute(bwd_); }  // unnormalized

 private:
  static std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
  }

  std::size_t n_;
  fftw_complex* buf_;
  fftw_plan fwd_, bwd_;
};

}  // namespace qnd
