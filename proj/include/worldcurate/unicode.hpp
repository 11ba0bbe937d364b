// UTF-8 handling and the single normal form (NFKC + case fold) applied to
// both metadata entries and alt-texts so matching sees one representation.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace worldcurate::uni {

// Byte offset of the first invalid UTF-8 sequence, or nullopt if well formed.
std::optional<std::size_t> find_invalid_utf8(std::string_view s);

// Strict decode; throws ValidationError naming the bad byte offset.
std::u32string decode_utf8(std::string_view s);
std::string encode_utf8(std::u32string_view s);

// NFKC + case fold. Idempotent; input must be valid UTF-8.
std::string normalize(std::string_view s);
std::u32string normalize_to_u32(std::string_view s);

bool is_space(char32_t c);      // Unicode White_Space
bool is_punct(char32_t c);      // general category P*
bool is_word_char(char32_t c);  // alphanumeric, for word-boundary matching

// Strips Unicode whitespace from both ends.
std::string trim(std::string_view s);

}  // namespace worldcurate::uni
