#pragma once

// Data-parallel inner loops shared by discovery (bit-packed label columns)
// and inference (factor tables). Every kernel has a portable scalar reference
// and, on x86-64, an AVX2 variant; the variant is picked once at startup from
// CPUID. Set ENTAILNET_SIMD=scalar in the environment to force the reference
// path.

#include <cstddef>
#include <cstdint>
#include <span>

namespace entailnet::kernels {

struct KernelTable {
  const char* name;
  std::uint64_t (*popcount)(const std::uint64_t* words, std::size_t n);
  std::uint64_t (*and_popcount)(const std::uint64_t* a, const std::uint64_t* b, std::size_t n);
  void (*and_into)(std::uint64_t* dst, const std::uint64_t* src, std::size_t n);
  void (*multiply)(double* dst, const double* src, std::size_t n);
  void (*add)(double* dst, const double* a, const double* b, std::size_t n);
  void (*scale)(double* dst, double factor, std::size_t n);
  double (*sum)(const double* values, std::size_t n);
};

const KernelTable& scalar_kernels();

/// nullptr when the AVX2 variant was not compiled in or the CPU lacks AVX2.
const KernelTable* avx2_kernels();

/// The table selected for this process.
const KernelTable& active();

inline std::uint64_t popcount(std::span<const std::uint64_t> words) {
  return active().popcount(words.data(), words.size());
}

/// popcount(a & b); spans must have equal length.
inline std::uint64_t and_popcount(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b) {
  return active().and_popcount(a.data(), b.data(), a.size());
}

inline void and_into(std::span<std::uint64_t> dst, std::span<const std::uint64_t> src) {
  active().and_into(dst.data(), src.data(), dst.size());
}

/// dst[i] *= src[i]
inline void multiply(std::span<double> dst, std::span<const double> src) {
  active().multiply(dst.data(), src.data(), dst.size());
}

/// dst[i] = a[i] + b[i]; dst may alias a or b.
inline void add(std::span<double> dst, std::span<const double> a, std::span<const double> b) {
  active().add(dst.data(), a.data(), b.data(), dst.size());
}

inline void scale(std::span<double> dst, double factor) {
  active().scale(dst.data(), factor, dst.size());
}

inline double sum(std::span<const double> values) {
  return active().sum(values.data(), values.size());
}

}  // namespace entailnet::kernels
