#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace irasm::util {

// SHA-256 of the input, lowercase hex.
std::string sha256_hex(std::string_view data);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);
// Write via a sibling temp file + rename so concurrent readers never see a
// partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string trim(std::string_view s);
std::string rtrim(std::string_view s);

// Splits on '\n'; a trailing newline does not produce a final empty element.
std::vector<std::string> split_lines(std::string_view text);

// Caps `text` at `max_chars` by keeping the head and tail halves around an
// elision marker. Texts at or under the cap pass through unchanged.
std::string elide_middle(std::string_view text, std::size_t max_chars);

// splitmix64: the project-wide deterministic PRNG for anything that must
// reproduce across runs and languages (dataset splits).
//   state += 0x9E3779B97F4A7C15
//   z = state; z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//   z = (z ^ (z >> 27)) * 0x94D049BB133111EB; return z ^ (z >> 31)
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        state_ += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

private:
    std::uint64_t state_;
};

}  // namespace irasm::util
