#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace gridfs::taskexec {

// Hex digits of pi's fractional part at 1-based positions
// [start, start + count), each extracted independently with the BBP series.
std::string pi_hex_digits(std::uint64_t start, std::uint64_t count);

// Contiguous (start, count) ranges of ceil(total / workers) digits covering
// positions 1..total. Fewer ranges than workers when total is small.
std::vector<std::pair<std::uint64_t, std::uint64_t>> split_spmd(std::uint64_t total,
                                                                std::uint64_t workers);

}  // namespace gridfs::taskexec
