#include "udkit/utf8.hpp"

#include <algorithm>
#include <cstddef>

namespace udkit::utf8 {

namespace {

struct CodepointRange {
  uint32_t lo, hi;
};

struct LowerMapEntry {
  uint32_t cp;
  uint32_t lower[3];  // zero-terminated unless all three used
};

#include "unicode_tables.inc"

bool in_ranges(const CodepointRange* table, size_t n, char32_t cp) {
  size_t lo = 0, hi = n;
  while (lo < hi) {
    size_t mid = (lo + hi) / 2;
    if (cp < table[mid].lo) {
      hi = mid;
    } else if (cp > table[mid].hi) {
      lo = mid + 1;
    } else {
      return true;
    }
  }
  return false;
}

const LowerMapEntry* lower_entry(char32_t cp) {
  size_t lo = 0, hi = kLowerMap_len;
  while (lo < hi) {
    size_t mid = (lo + hi) / 2;
    if (kLowerMap[mid].cp < cp) {
      lo = mid + 1;
    } else if (kLowerMap[mid].cp > cp) {
      hi = mid;
    } else {
      return &kLowerMap[mid];
    }
  }
  return nullptr;
}

}  // namespace

std::vector<char32_t> decode(std::string_view s) {
  std::vector<char32_t> out;
  out.reserve(s.size());
  size_t i = 0;
  while (i < s.size()) {
    unsigned char b0 = static_cast<unsigned char>(s[i]);
    char32_t cp = 0xFFFD;
    size_t len = 1;
    if (b0 < 0x80) {
      cp = b0;
    } else if ((b0 & 0xE0) == 0xC0) {
      len = 2;
      cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
      len = 3;
      cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
      len = 4;
      cp = b0 & 0x07;
    } else {
      out.push_back(0xFFFD);
      ++i;
      continue;
    }
    if (len > 1) {
      if (i + len > s.size()) {
        out.push_back(0xFFFD);
        ++i;
        continue;
      }
      bool ok = true;
      for (size_t k = 1; k < len; ++k) {
        unsigned char bk = static_cast<unsigned char>(s[i + k]);
        if ((bk & 0xC0) != 0x80) {
          ok = false;
          break;
        }
        cp = (cp << 6) | (bk & 0x3F);
      }
      if (!ok || cp > 0x10FFFF) {
        out.push_back(0xFFFD);
        ++i;
        continue;
      }
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

std::string encode_one(char32_t cp) {
  std::string out;
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
  return out;
}

std::string encode(const std::vector<char32_t>& cps) {
  std::string out;
  out.reserve(cps.size());
  for (char32_t cp : cps) out += encode_one(cp);
  return out;
}

bool is_alpha(char32_t cp) { return in_ranges(kAlphaRanges, kAlphaRanges_len, cp); }
bool is_upper(char32_t cp) { return in_ranges(kUpperRanges, kUpperRanges_len, cp); }
bool is_digit(char32_t cp) { return in_ranges(kDigitRanges, kDigitRanges_len, cp); }

bool is_space(char32_t cp) {
  switch (cp) {
    case U' ':
    case U'\t':
    case U'\n':
    case U'\r':
    case U'\v':
    case U'\f':
    case 0x85:    // NEL
    case 0xA0:    // NBSP
    case 0x2028:  // line separator
    case 0x2029:  // paragraph separator
      return true;
    default:
      return (cp >= 0x2000 && cp <= 0x200A) || cp == 0x3000 || cp == 0x1680 ||
             cp == 0x202F || cp == 0x205F;
  }
}

std::string to_lower(std::string_view s) {
  std::vector<char32_t> cps = decode(s);
  std::string out;
  out.reserve(s.size());
  for (char32_t cp : cps) {
    const LowerMapEntry* e = lower_entry(cp);
    if (e == nullptr) {
      out += encode_one(cp);
    } else {
      for (int k = 0; k < 3 && e->lower[k] != 0; ++k) {
        out += encode_one(e->lower[k]);
      }
    }
  }
  return out;
}

size_t length(std::string_view s) { return decode(s).size(); }

}  // namespace udkit::utf8
