#pragma once

// Text normalization: lowercase, strip punctuation and digits, drop stopwords,
// stem. Output tokens always match ^[a-z]+$.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "ecc/io.hpp"
#include "ecc/porter.hpp"

namespace ecc {

using TokenList = std::vector<std::string>;
using StopwordSet = std::unordered_set<std::string>;

namespace detail {

// Latin-1 Supplement and Latin Extended-A letters with a one-letter ASCII
// equivalent. Index = code point - 0xC0; '\0' means no mapping.
inline constexpr char kLatinFold[] =
    // C0..FF
    "aaaaaa\0ceeeeiiii" "dnooooo\0ouuuuy\0\0"
    "aaaaaa\0ceeeeiiii" "dnooooo\0ouuuuy\0y"
    // 100..17F
    "aaaaaaccccccccdd" "ddeeeeeeeeeegggg" "gggghhhhiiiiiiii" "ii\0\0jjkkklllllll"
    "lllnnnnnnnnnoooo" "oo\0\0rrrrrrssssss" "ssttttttuuuuuuuu" "uuuuwwyyyzzzzzzs";

inline char fold_codepoint(std::uint32_t cp) {
  if (cp >= 0xC0 && cp <= 0x17F) return kLatinFold[cp - 0xC0];
  return '\0';
}

/// Decodes one UTF-8 sequence at s[i]; advances i. Invalid bytes decode as
/// U+FFFD and consume one byte.
inline std::uint32_t next_codepoint(std::string_view s, std::size_t& i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  int len = 0;
  std::uint32_t cp = 0;
  if (b0 < 0x80) {
    ++i;
    return b0;
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
    ++i;
    return 0xFFFD;
  }
  if (i + static_cast<std::size_t>(len) > s.size()) {
    ++i;
    return 0xFFFD;
  }
  for (int k = 1; k < len; ++k) {
    const auto b = static_cast<unsigned char>(s[i + static_cast<std::size_t>(k)]);
    if ((b & 0xC0) != 0x80) {
      ++i;
      return 0xFFFD;
    }
    cp = (cp << 6) | (b & 0x3F);
  }
  i += static_cast<std::size_t>(len);
  return cp;
}

inline bool is_space_codepoint(std::uint32_t cp) {
  return cp == ' ' || cp == '\t' || cp == '\n' || cp == '\r' || cp == '\f' || cp == '\v' ||
         cp == 0xA0 || cp == 0x2028 || cp == 0x2029 || (cp >= 0x2000 && cp <= 0x200A) ||
         cp == 0x3000;
}

/// Lowercased ASCII letters and single spaces; everything else removed.
inline std::string normalize_chars(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    const std::uint32_t cp = next_codepoint(text, i);
    if (cp >= 'A' && cp <= 'Z') {
      out += static_cast<char>(cp - 'A' + 'a');
    } else if (cp >= 'a' && cp <= 'z') {
      out += static_cast<char>(cp);
    } else if (is_space_codepoint(cp)) {
      out += ' ';
    } else if (const char f = fold_codepoint(cp); f != '\0') {
      out += f;
    }
  }
  return out;
}

}  // namespace detail

/// Bundled English stopword list (the common NLTK list, apostrophes removed).
inline const StopwordSet& default_stopwords() {
  static const StopwordSet words = [] {
    static constexpr std::string_view list[] = {
        "i", "me", "my", "myself", "we", "our", "ours", "ourselves", "you", "youre", "youve",
        "youll", "youd", "your", "yours", "yourself", "yourselves", "he", "him", "his",
        "himself", "she", "shes", "her", "hers", "herself", "it", "its", "itself", "they",
        "them", "their", "theirs", "themselves", "what", "which", "who", "whom", "this", "that",
        "thatll", "these", "those", "am", "is", "are", "was", "were", "be", "been", "being",
        "have", "has", "had", "having", "do", "does", "did", "doing", "a", "an", "the", "and",
        "but", "if", "or", "because", "as", "until", "while", "of", "at", "by", "for", "with",
        "about", "against", "between", "into", "through", "during", "before", "after", "above",
        "below", "to", "from", "up", "down", "in", "out", "on", "off", "over", "under", "again",
        "further", "then", "once", "here", "there", "when", "where", "why", "how", "all", "any",
        "both", "each", "few", "more", "most", "other", "some", "such", "no", "nor", "not",
        "only", "own", "same", "so", "than", "too", "very", "s", "t", "can", "will", "just",
        "don", "dont", "should", "shouldve", "now", "d", "ll", "m", "o", "re", "ve", "y", "ain",
        "aren", "arent", "couldn", "couldnt", "didn", "didnt", "doesn", "doesnt", "hadn",
        "hadnt", "hasn", "hasnt", "haven", "havent", "isn", "isnt", "ma", "mightn", "mightnt",
        "mustn", "mustnt", "needn", "neednt", "shan", "shant", "shouldn", "shouldnt", "wasn",
        "wasnt", "weren", "werent", "won", "wont", "wouldn", "wouldnt"};
    StopwordSet set;
    for (const auto w : list) set.emplace(w);
    return set;
  }();
  return words;
}

/// One stopword per line; entries are normalized like post text.
inline StopwordSet load_stopwords(const std::filesystem::path& path) {
  StopwordSet out;
  for_each_line(path, [&](std::string_view line, std::size_t) {
    std::string w = detail::normalize_chars(line);
    std::erase(w, ' ');
    if (!w.empty()) out.insert(std::move(w));
  });
  return out;
}

/// Porter stem iterated to a fixed point, so stemming a stem is a no-op.
inline std::string stable_stem(std::string_view word) {
  std::string cur(word);
  for (int i = 0; i < 8; ++i) {
    std::string next = PorterStemmer::stem(cur);
    if (next == cur) break;
    cur = std::move(next);
  }
  return cur;
}

/// Stopwords are matched before stemming; a stem that is itself a stopword is
/// dropped too, so no output token is ever a stopword.
inline TokenList clean(std::string_view text, const StopwordSet& stopwords) {
  TokenList tokens;
  const std::string norm = detail::normalize_chars(text);
  std::size_t pos = 0;
  while (pos < norm.size()) {
    const std::size_t start = norm.find_first_not_of(' ', pos);
    if (start == std::string::npos) break;
    std::size_t end = norm.find(' ', start);
    if (end == std::string::npos) end = norm.size();
    const std::string_view word(norm.data() + start, end - start);
    pos = end;
    if (stopwords.contains(std::string(word))) continue;
    std::string stem = stable_stem(word);
    if (stem.empty() || stopwords.contains(stem)) continue;
    tokens.push_back(std::move(stem));
  }
  return tokens;
}

inline std::string join_tokens(const TokenList& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

}  // namespace ecc
