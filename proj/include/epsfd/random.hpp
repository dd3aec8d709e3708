#pragma once

// Seeded random stream with portable uniform and Gaussian draws. The
// standard library distributions are implementation-defined, so both are
// built directly on mt19937_64 output; the full stream state (engine plus
// the cached Box-Muller spare) serializes exactly, which checkpoint resume
// depends on.

#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <random>
#include <vector>

namespace epsfd {

class RandomStream {
 public:
  RandomStream() : RandomStream(0) {}
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Marsaglia polar method; one spare kept between calls.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    double r = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * r;
    has_spare_ = true;
    return u * r;
  }

  std::uint64_t next_u64() { return engine_(); }

  // Fisher-Yates over [0, n)
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(engine_() % i);
      std::swap(v[i - 1], v[j]);
    }
  }

  void save(std::ostream& os) const {
    os << engine_ << '\n' << (has_spare_ ? 1 : 0) << ' ';
    os.precision(17);
    os << spare_ << '\n';
  }

  void load(std::istream& is) {
    is >> engine_;
    int flag = 0;
    is >> flag >> spare_;
    has_spare_ = flag != 0;
  }

  bool operator==(const RandomStream& o) const {
    return engine_ == o.engine_ && has_spare_ == o.has_spare_ &&
           (!has_spare_ || spare_ == o.spare_);
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace epsfd
