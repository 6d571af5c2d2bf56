#include "cnalign/text.hpp"

#include <openssl/evp.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

#include <array>
#include <stdexcept>

namespace cnalign {

namespace {

// Decodes one code point starting at offset i; returns the code point and
// advances i. Negative result means malformed input.
UChar32 next_code_point(std::string_view s, int32_t& i) {
  UChar32 c;
  const auto* data = reinterpret_cast<const uint8_t*>(s.data());
  const auto length = static_cast<int32_t>(s.size());
  U8_NEXT(data, i, length, c);
  return c;
}

}  // namespace

std::string nfc(std::string_view utf8) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* normalizer = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) throw std::runtime_error("ICU NFC normalizer unavailable");

  // Fast path: ASCII is already NFC.
  bool ascii = true;
  for (char ch : utf8) {
    if (static_cast<unsigned char>(ch) >= 0x80) {
      ascii = false;
      break;
    }
  }
  if (ascii) return std::string(utf8);

  for (int32_t i = 0; i < static_cast<int32_t>(utf8.size());) {
    if (next_code_point(utf8, i) < 0) throw std::invalid_argument("invalid UTF-8 input");
  }
  icu::UnicodeString source = icu::UnicodeString::fromUTF8(
      icu::StringPiece(utf8.data(), static_cast<int32_t>(utf8.size())));
  icu::UnicodeString normalized = normalizer->normalize(source, status);
  if (U_FAILURE(status)) throw std::invalid_argument("NFC normalization failed");
  std::string out;
  normalized.toUTF8String(out);
  return out;
}

std::string trim(std::string_view utf8) {
  const auto length = static_cast<int32_t>(utf8.size());
  int32_t begin = 0;
  while (begin < length) {
    int32_t next = begin;
    UChar32 c = next_code_point(utf8, next);
    if (c < 0 || !u_isUWhiteSpace(c)) break;
    begin = next;
  }
  int32_t end = begin;
  for (int32_t i = begin; i < length;) {
    UChar32 c = next_code_point(utf8, i);
    if (c < 0 || !u_isUWhiteSpace(c)) end = i;
  }
  return std::string(utf8.substr(static_cast<std::size_t>(begin), static_cast<std::size_t>(end - begin)));
}

std::vector<std::string> split_whitespace(std::string_view utf8) {
  std::vector<std::string> out;
  const auto length = static_cast<int32_t>(utf8.size());
  int32_t token_start = -1;
  for (int32_t i = 0; i < length;) {
    const int32_t start = i;
    UChar32 c = next_code_point(utf8, i);
    const bool space = c >= 0 && u_isUWhiteSpace(c);
    if (space) {
      if (token_start >= 0) {
        out.emplace_back(utf8.substr(static_cast<std::size_t>(token_start),
                                     static_cast<std::size_t>(start - token_start)));
        token_start = -1;
      }
    } else if (token_start < 0) {
      token_start = start;
    }
  }
  if (token_start >= 0) out.emplace_back(utf8.substr(static_cast<std::size_t>(token_start)));
  return out;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out.append(sep);
    out.append(parts[i]);
  }
  return out;
}

std::size_t count_occurrences(std::string_view haystack, std::string_view needle) {
  if (needle.empty()) return 0;
  std::size_t count = 0;
  for (std::size_t pos = haystack.find(needle); pos != std::string_view::npos;
       pos = haystack.find(needle, pos + needle.size())) {
    ++count;
  }
  return count;
}

std::string sha256_hex(std::string_view data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int length = 0;
  if (EVP_Digest(data.data(), data.size(), digest.data(), &length, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(length * 2);
  for (unsigned int i = 0; i < length; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

std::vector<std::string> WhitespaceTokenizer::tokenize(std::string_view text) const {
  return split_whitespace(nfc(text));
}

}  // namespace cnalign
