#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace cnalign {

/// Unicode NFC normalization of UTF-8 text. Invalid UTF-8 is rejected with
/// std::invalid_argument.
std::string nfc(std::string_view utf8);

/// Strips leading and trailing Unicode whitespace.
std::string trim(std::string_view utf8);

/// Splits on runs of Unicode whitespace. No normalization.
std::vector<std::string> split_whitespace(std::string_view utf8);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

/// Counts non-overlapping occurrences of needle in haystack.
std::size_t count_occurrences(std::string_view haystack, std::string_view needle);

/// Lower-case hex SHA-256 digest.
std::string sha256_hex(std::string_view data);

class Tokenizer {
 public:
  virtual ~Tokenizer() = default;
  virtual std::vector<std::string> tokenize(std::string_view text) const = 0;
};

/// NFC-normalizes, then splits on Unicode whitespace. Case and punctuation
/// are kept as-is.
class WhitespaceTokenizer final : public Tokenizer {
 public:
  std::vector<std::string> tokenize(std::string_view text) const override;
};

}  // namespace cnalign
