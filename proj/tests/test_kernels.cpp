#include <cstdlib>
#include <random>
#include <vector>

#include "doctest.h"
#include "entailnet/kernels.hpp"

using namespace entailnet;

namespace {

std::vector<const kernels::KernelTable*> variants() {
  std::vector<const kernels::KernelTable*> v{&kernels::scalar_kernels()};
  if (auto* a = kernels::avx2_kernels()) v.push_back(a);
  return v;
}

std::vector<std::uint64_t> random_words(std::mt19937_64& rng, std::size_t n) {
  std::vector<std::uint64_t> w(n);
  for (auto& x : w) x = rng();
  return w;
}

std::vector<double> random_doubles(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

}  // namespace

TEST_SUITE("kernels") {
  TEST_CASE("scalar popcount matches a bit loop") {
    std::mt19937_64 rng(7);
    for (std::size_t n : {0, 1, 3, 4, 5, 17, 64}) {
      auto w = random_words(rng, n);
      std::uint64_t expect = 0;
      for (auto x : w)
        for (int b = 0; b < 64; ++b) expect += (x >> b) & 1U;
      CHECK(kernels::scalar_kernels().popcount(w.data(), n) == expect);
    }
  }

  TEST_CASE("every variant agrees with the scalar reference") {
    const auto& ref = kernels::scalar_kernels();
    std::mt19937_64 rng(11);
    for (const auto* k : variants()) {
      CAPTURE(k->name);
      for (std::size_t n : {0, 1, 2, 3, 4, 5, 7, 8, 9, 15, 16, 31, 33, 100, 257}) {
        CAPTURE(n);
        auto a = random_words(rng, n), b = random_words(rng, n);
        CHECK(k->popcount(a.data(), n) == ref.popcount(a.data(), n));
        CHECK(k->and_popcount(a.data(), b.data(), n) == ref.and_popcount(a.data(), b.data(), n));
        auto x = a, y = a;
        k->and_into(x.data(), b.data(), n);
        ref.and_into(y.data(), b.data(), n);
        CHECK(x == y);

        auto p = random_doubles(rng, n), q = random_doubles(rng, n);
        auto m1 = p, m2 = p;
        k->multiply(m1.data(), q.data(), n);
        ref.multiply(m2.data(), q.data(), n);
        CHECK(m1 == m2);
        std::vector<double> s1(n), s2(n);
        k->add(s1.data(), p.data(), q.data(), n);
        ref.add(s2.data(), p.data(), q.data(), n);
        CHECK(s1 == s2);
        k->add(s1.data(), s1.data(), q.data(), n);  // aliasing dst with an input
        ref.add(s2.data(), s2.data(), q.data(), n);
        CHECK(s1 == s2);
        auto c1 = p, c2 = p;
        k->scale(c1.data(), 0.37, n);
        ref.scale(c2.data(), 0.37, n);
        CHECK(c1 == c2);
        // same association on both paths, so exact
        CHECK(k->sum(p.data(), n) == ref.sum(p.data(), n));
      }
    }
  }

  TEST_CASE("scalar sum is accurate") {
    std::vector<double> v(1001, 0.1);
    CHECK(kernels::scalar_kernels().sum(v.data(), v.size()) == doctest::Approx(100.1).epsilon(1e-12));
    CHECK(kernels::scalar_kernels().sum(nullptr, 0) == 0.0);
  }

  TEST_CASE("dispatch honours the override") {
    const char* env = std::getenv("ENTAILNET_SIMD");
    if (env && std::string(env) == "scalar") {
      CHECK(std::string(kernels::active().name) == "scalar");
    } else if (kernels::avx2_kernels()) {
      CHECK(std::string(kernels::active().name) == "avx2");
    } else {
      CHECK(std::string(kernels::active().name) == "scalar");
    }
  }
}
