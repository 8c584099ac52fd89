#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace fimkit {

// 64-bit FNV-1a. Used for prompt digests, config hashes and seed derivation.
std::uint64_t fnv1a64(std::string_view data);

// Lowercase hex rendering of a 64-bit value, zero padded to 16 digits.
std::string hex64(std::uint64_t v);

std::uint64_t splitmix64(std::uint64_t x);

// Independent stream seed from a run seed and a stable tag (e.g. repo:path).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag);

// Unbiased draw in [0, n) via rejection sampling. n must be > 0.
std::uint64_t draw_below(std::mt19937_64& rng, std::uint64_t n);

// Draw in [0, 1) with 53 bits of precision.
double draw_unit(std::mt19937_64& rng);

// Weighted index draw. Throws std::invalid_argument when no weight is > 0.
std::size_t draw_weighted(std::mt19937_64& rng, const std::vector<double>& weights);

// Byte offsets of each UTF-8 code point start, with text.size() appended as a
// sentinel. Bytes that do not form a valid sequence count as one code point.
std::vector<std::size_t> codepoint_offsets(std::string_view text);

std::size_t codepoint_count(std::string_view text);

// Decode to code points; invalid bytes map to their byte value.
std::u32string decode_utf8(std::string_view text);

// Physical lines: split on '\n', trailing '\r' stripped, no final empty line
// when the text ends with a newline.
std::vector<std::string> split_lines(std::string_view text);

bool is_blank(std::string_view line);

}  // namespace fimkit
