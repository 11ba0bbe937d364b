#include "worldcurate/unicode.hpp"

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include "worldcurate/errors.hpp"

namespace worldcurate::uni {

namespace {

// Decodes one code point starting at byte i. Returns false on any invalid
// sequence (overlong, surrogate, out of range, truncated).
bool decode_one(const unsigned char* p, std::size_t n, std::size_t i, char32_t& out,
                std::size_t& len) {
    const unsigned char b = p[i];
    if (b < 0x80) {
        out = b;
        len = 1;
        return true;
    }
    std::uint32_t cp = 0;
    std::uint32_t min = 0;
    if ((b & 0xE0) == 0xC0) {
        len = 2;
        cp = b & 0x1F;
        min = 0x80;
    } else if ((b & 0xF0) == 0xE0) {
        len = 3;
        cp = b & 0x0F;
        min = 0x800;
    } else if ((b & 0xF8) == 0xF0) {
        len = 4;
        cp = b & 0x07;
        min = 0x10000;
    } else {
        return false;
    }
    if (i + len > n) return false;
    for (std::size_t k = 1; k < len; ++k) {
        if ((p[i + k] & 0xC0) != 0x80) return false;
        cp = (cp << 6) | (p[i + k] & 0x3F);
    }
    if (cp < min || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return false;
    out = static_cast<char32_t>(cp);
    return true;
}

const icu::Normalizer2& nfkc_casefold() {
    UErrorCode ec = U_ZERO_ERROR;
    const icu::Normalizer2* n = icu::Normalizer2::getNFKCCasefoldInstance(ec);
    if (U_FAILURE(ec) || n == nullptr) {
        throw InternalError("ICU NFKC_Casefold normalizer unavailable");
    }
    return *n;
}

}  // namespace

std::optional<std::size_t> find_invalid_utf8(std::string_view s) {
    const auto* p = reinterpret_cast<const unsigned char*>(s.data());
    const std::size_t n = s.size();
    std::size_t i = 0;
    while (i < n) {
        char32_t cp;
        std::size_t len;
        if (!decode_one(p, n, i, cp, len)) return i;
        i += len;
    }
    return std::nullopt;
}

std::u32string decode_utf8(std::string_view s) {
    const auto* p = reinterpret_cast<const unsigned char*>(s.data());
    const std::size_t n = s.size();
    std::u32string out;
    out.reserve(n);
    std::size_t i = 0;
    while (i < n) {
        char32_t cp;
        std::size_t len;
        if (!decode_one(p, n, i, cp, len)) {
            throw ValidationError("invalid UTF-8 at byte offset " + std::to_string(i));
        }
        out.push_back(cp);
        i += len;
    }
    return out;
}

std::string encode_utf8(std::u32string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char32_t c : s) {
        const std::uint32_t cp = c;
        if (cp < 0x80) {
            out.push_back(static_cast<char>(cp));
        } else if (cp < 0x800) {
            out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        } else if (cp < 0x10000) {
            out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        } else {
            out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        }
    }
    return out;
}

std::string normalize(std::string_view s) {
    static const icu::Normalizer2& norm = nfkc_casefold();
    icu::UnicodeString in =
        icu::UnicodeString::fromUTF8(icu::StringPiece(s.data(), static_cast<int32_t>(s.size())));
    UErrorCode ec = U_ZERO_ERROR;
    icu::UnicodeString folded = norm.normalize(in, ec);
    if (U_FAILURE(ec)) throw ValidationError("unicode normalization failed");
    std::string out;
    folded.toUTF8String(out);
    return out;
}

std::u32string normalize_to_u32(std::string_view s) { return decode_utf8(normalize(s)); }

bool is_space(char32_t c) { return u_isUWhiteSpace(static_cast<UChar32>(c)) != 0; }

bool is_punct(char32_t c) { return u_ispunct(static_cast<UChar32>(c)) != 0; }

bool is_word_char(char32_t c) { return u_isalnum(static_cast<UChar32>(c)) != 0; }

std::string trim(std::string_view s) {
    std::u32string cps = decode_utf8(s);
    std::size_t b = 0;
    std::size_t e = cps.size();
    while (b < e && is_space(cps[b])) ++b;
    while (e > b && is_space(cps[e - 1])) --e;
    return encode_utf8(std::u32string_view(cps).substr(b, e - b));
}

}  // namespace worldcurate::uni
