#include "fimkit/util.hpp"

#include <stdexcept>

namespace fimkit {

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) {
  return splitmix64(seed ^ fnv1a64(tag));
}

std::uint64_t draw_below(std::mt19937_64& rng, std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("draw_below: n must be > 0");
  const std::uint64_t threshold = -n % n;
  for (;;) {
    std::uint64_t r = rng();
    if (r >= threshold) return r % n;
  }
}

double draw_unit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::size_t draw_weighted(std::mt19937_64& rng, const std::vector<double>& weights) {
  double total = 0.0;
  for (double w : weights) {
    if (w > 0.0) total += w;
  }
  if (total <= 0.0) throw std::invalid_argument("draw_weighted: no positive weight");
  double x = draw_unit(rng) * total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    if (x < weights[i]) return i;
    x -= weights[i];
  }
  for (std::size_t i = weights.size(); i-- > 0;) {
    if (weights[i] > 0.0) return i;
  }
  throw std::logic_error("draw_weighted: unreachable");
}

namespace {

int utf8_seq_len(unsigned char b) {
  if (b < 0x80) return 1;
  if ((b & 0xe0) == 0xc0) return 2;
  if ((b & 0xf0) == 0xe0) return 3;
  if ((b & 0xf8) == 0xf0) return 4;
  return 1;  // stray continuation or invalid lead byte
}

}  // namespace

std::vector<std::size_t> codepoint_offsets(std::string_view text) {
  std::vector<std::size_t> offsets;
  offsets.reserve(text.size() + 1);
  std::size_t i = 0;
  while (i < text.size()) {
    offsets.push_back(i);
    int len = utf8_seq_len(static_cast<unsigned char>(text[i]));
    // Clip sequences that would run past the end or have bad continuations.
    int ok = 1;
    for (int k = 1; k < len && i + static_cast<std::size_t>(k) < text.size(); ++k) {
      if ((static_cast<unsigned char>(text[i + static_cast<std::size_t>(k)]) & 0xc0) != 0x80) break;
      ++ok;
    }
    i += static_cast<std::size_t>(ok == len ? len : 1);
  }
  offsets.push_back(text.size());
  return offsets;
}

std::size_t codepoint_count(std::string_view text) {
  return codepoint_offsets(text).size() - 1;
}

std::u32string decode_utf8(std::string_view text) {
  std::u32string out;
  out.reserve(text.size());
  auto offs = codepoint_offsets(text);
  for (std::size_t i = 0; i + 1 < offs.size(); ++i) {
    std::size_t b = offs[i], e = offs[i + 1];
    if (e - b == 1) {
      out.push_back(static_cast<char32_t>(static_cast<unsigned char>(text[b])));
      continue;
    }
    char32_t cp = 0;
    unsigned char lead = static_cast<unsigned char>(text[b]);
    int len = static_cast<int>(e - b);
    cp = lead & (0x7f >> len);
    for (std::size_t k = b + 1; k < e; ++k) {
      cp = (cp << 6) | (static_cast<unsigned char>(text[k]) & 0x3f);
    }
    out.push_back(cp);
  }
  return out;
}

std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) {
      if (start < text.size()) {
        std::string_view line = text.substr(start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.emplace_back(line);
      }
      break;
    }
    std::string_view line = text.substr(start, nl - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.emplace_back(line);
    start = nl + 1;
  }
  return lines;
}

bool is_blank(std::string_view line) {
  for (char c : line) {
    if (c != ' ' && c != '\t' && c != '\r' && c != '\v' && c != '\f') return false;
  }
  return true;
}

}  // namespace fimkit
