#include "gridfs/taskexec/pi.hpp"

#include <cmath>

#include "gridfs/error.hpp"

namespace gridfs::taskexec {

namespace {

std::uint64_t pow16_mod(std::uint64_t exp, std::uint64_t mod) {
  if (mod == 1) return 0;
  unsigned __int128 result = 1;
  unsigned __int128 base = 16 % mod;
  while (exp) {
    if (exp & 1) result = (result * base) % mod;
    base = (base * base) % mod;
    exp >>= 1;
  }
  return static_cast<std::uint64_t>(result);
}

// Fractional part of sum_k 16^(d-k) / (8k + j).
long double series(std::uint64_t j, std::uint64_t d) {
  long double s = 0;
  for (std::uint64_t k = 0; k <= d; ++k) {
    std::uint64_t den = 8 * k + j;
    s += static_cast<long double>(pow16_mod(d - k, den)) / static_cast<long double>(den);
    s -= std::floor(s);
  }
  long double p = 1.0L / 16;
  for (std::uint64_t k = d + 1;; ++k) {
    long double term = p / static_cast<long double>(8 * k + j);
    if (term < 1e-22L) break;
    s += term;
    p /= 16;
  }
  return s - std::floor(s);
}

char digit_at(std::uint64_t d) {
  long double x = 4 * series(1, d) - 2 * series(4, d) - series(5, d) - series(6, d);
  x -= std::floor(x);
  return "0123456789ABCDEF"[static_cast<int>(x * 16)];
}

}  // namespace

std::string pi_hex_digits(std::uint64_t start, std::uint64_t count) {
  if (start < 1) throw Error(Errc::InvalidArgument, "start is 1-based");
  std::string out;
  out.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) out.push_back(digit_at(start - 1 + i));
  return out;
}

std::vector<std::pair<std::uint64_t, std::uint64_t>> split_spmd(std::uint64_t total,
                                                                std::uint64_t workers) {
  if (workers < 1) throw Error(Errc::InvalidArgument, "workers must be >= 1");
  std::vector<std::pair<std::uint64_t, std::uint64_t>> out;
  if (total == 0) return out;
  std::uint64_t per = (total + workers - 1) / workers;
  for (std::uint64_t s = 1; s <= total; s += per) out.emplace_back(s, std::min(per, total - s + 1));
  return out;
}

}  // namespace gridfs::taskexec
