#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace capfuse {

using json = nlohmann::json;

// Seed-reproducible generator. std::mt19937_64's output sequence is fixed by
// the standard; the distributions in <random> are not, so bounded draws and
// shuffles go through the helpers below.
using Rng = std::mt19937_64;

// Uniform integer in [0, bound) by rejection sampling. bound must be > 0.
std::uint64_t uniform_below(Rng& rng, std::uint64_t bound);

// Fisher-Yates shuffle driven by uniform_below.
template <typename T>
void shuffle(std::span<T> items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_below(rng, i));
    using std::swap;
    swap(items[i - 1], items[j]);
  }
}

// 16 lowercase hex characters from one draw.
std::string random_hex_token(Rng& rng);

std::string sha256_hex(std::string_view data);

// Reads a whole line-delimited JSON file. Blank lines are skipped; each
// returned entry keeps its 1-based line number.
struct JsonLine {
  std::size_t line_no;
  json value;
};
std::vector<JsonLine> read_jsonl(const std::filesystem::path& path);

// Writes to a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::string to_jsonl(const std::vector<json>& records);

// Compact dump with invalid UTF-8 replaced rather than throwing.
std::string dump_compact(const json& value);

std::string trim(std::string_view s);

}  // namespace capfuse
