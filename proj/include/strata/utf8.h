#ifndef STRATA_UTF8_H_
#define STRATA_UTF8_H_

#include <string>
#include <string_view>

namespace strata::utf8 {

// Decodes UTF-8. Throws DataError on malformed input, overlong forms and
// surrogates.
std::u32string decode(std::string_view text);

// Throws DataError if `cp` is not a Unicode scalar value.
std::string encode(std::u32string_view text);
void append(std::string& out, char32_t cp);

constexpr bool is_scalar(char32_t cp) {
  return cp <= 0x10FFFF && (cp < 0xD800 || cp > 0xDFFF);
}

}  // namespace strata::utf8

#endif  // STRATA_UTF8_H_
