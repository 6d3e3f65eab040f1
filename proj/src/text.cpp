#include "sentdiag/text.hpp"

#include <algorithm>
#include <array>
#include <numeric>
#include <unordered_set>

#include <json.hpp>

namespace sentdiag::text {

namespace {

constexpr char32_t kReplacement = 0xFFFD;

bool is_space(char32_t cp) {
  switch (cp) {
    case U' ': case U'\t': case U'\n': case U'\r': case U'\v': case U'\f':
    case 0x00A0: case 0x1680: case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;
  }
}

bool is_edge_punct(char32_t cp) {
  if (cp < 0x80) {
    return (cp >= 0x21 && cp <= 0x2F) || (cp >= 0x3A && cp <= 0x40) ||
           (cp >= 0x5B && cp <= 0x60) || (cp >= 0x7B && cp <= 0x7E);
  }
  switch (cp) {
    case 0x2018: case 0x2019: case 0x201C: case 0x201D: case 0x2026:
    case 0x00AB: case 0x00BB: case 0x2013: case 0x2014: case 0x00BF: case 0x00A1:
      return true;
    default:
      return false;
  }
}

bool is_wordlike(char32_t cp) {
  if (cp < 0x80) {
    return (cp >= U'0' && cp <= U'9') || (cp >= U'a' && cp <= U'z') || (cp >= U'A' && cp <= U'Z');
  }
  return !is_emoji(cp) && !is_edge_punct(cp) && cp != kReplacement;
}

}  // namespace

std::u32string decode_utf8(std::string_view s) {
  std::u32string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    int extra = 0;
    char32_t cp = 0;
    if (b0 < 0x80) {
      cp = b0;
    } else if ((b0 & 0xE0) == 0xC0 && b0 >= 0xC2) {
      extra = 1;
      cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
      extra = 2;
      cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0 && b0 <= 0xF4) {
      extra = 3;
      cp = b0 & 0x07;
    } else {
      out.push_back(kReplacement);
      ++i;
      continue;
    }
    bool ok = true;
    for (int k = 1; k <= extra; ++k) {
      if (i + k >= s.size()) {
        ok = false;
        break;
      }
      const auto b = static_cast<unsigned char>(s[i + k]);
      if ((b & 0xC0) != 0x80) {
        ok = false;
        break;
      }
      cp = (cp << 6) | (b & 0x3F);
    }
    // Reject overlongs, surrogates and out-of-range values.
    if (ok && ((extra == 2 && cp < 0x800) || (extra == 3 && (cp < 0x10000 || cp > 0x10FFFF)) ||
               (cp >= 0xD800 && cp <= 0xDFFF))) {
      ok = false;
    }
    if (!ok) {
      out.push_back(kReplacement);
      ++i;
      continue;
    }
    out.push_back(cp);
    i += static_cast<std::size_t>(extra) + 1;
  }
  return out;
}

std::string encode_utf8(std::u32string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char32_t cp : s) {
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

std::size_t codepoint_length(std::string_view s) { return decode_utf8(s).size(); }

bool is_emoji(char32_t cp) {
  return (cp >= 0x1F000 && cp <= 0x1FAFF) ||  // pictographs, emoticons, transport, supplemental
         (cp >= 0x2600 && cp <= 0x27BF) ||    // misc symbols, dingbats
         (cp >= 0x2300 && cp <= 0x23FF) ||    // misc technical (watch, hourglass)
         (cp >= 0x2B00 && cp <= 0x2BFF) ||    // arrows, stars
         (cp >= 0xFE00 && cp <= 0xFE0F) ||    // variation selectors
         (cp >= 0xE0020 && cp <= 0xE007F) ||  // tag sequences
         cp == 0x200D || cp == 0x20E3 || cp == 0x3030 || cp == 0x303D || cp == 0x2764 ||
         cp == 0x00A9 || cp == 0x00AE || cp == 0x2122;
}

std::string trim(std::string_view s) {
  auto u = decode_utf8(s);
  std::size_t b = 0;
  std::size_t e = u.size();
  while (b < e && is_space(u[b])) ++b;
  while (e > b && is_space(u[e - 1])) --e;
  // Re-slice the original bytes so nothing outside the trimmed edges changes.
  std::size_t lead_bytes = encode_utf8(std::u32string_view(u).substr(0, b)).size();
  std::size_t tail_bytes = encode_utf8(std::u32string_view(u).substr(e)).size();
  if (lead_bytes + tail_bytes >= s.size()) return {};
  return std::string(s.substr(lead_bytes, s.size() - lead_bytes - tail_bytes));
}

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

bool iequals_ascii(std::string_view a, std::string_view b) {
  return a.size() == b.size() && ascii_lower(a) == ascii_lower(b);
}

std::vector<std::string> word_tokens(std::string_view s) {
  std::vector<std::string> out;
  const auto u = decode_utf8(s);
  std::size_t i = 0;
  while (i < u.size()) {
    while (i < u.size() && is_space(u[i])) ++i;
    std::size_t j = i;
    while (j < u.size() && !is_space(u[j])) ++j;
    std::size_t b = i;
    std::size_t e = j;
    while (b < e && (is_edge_punct(u[b]) || is_emoji(u[b]))) ++b;
    while (e > b && (is_edge_punct(u[e - 1]) || is_emoji(u[e - 1]))) --e;
    if (b < e) {
      auto piece = std::u32string_view(u).substr(b, e - b);
      if (std::any_of(piece.begin(), piece.end(), is_wordlike)) {
        out.push_back(ascii_lower(encode_utf8(piece)));
      }
    }
    i = j;
  }
  return out;
}

std::size_t word_count(std::string_view s) {
  std::size_t n = 0;
  bool in_word = false;
  for (char32_t cp : decode_utf8(s)) {
    if (is_space(cp)) {
      in_word = false;
    } else if (!in_word) {
      in_word = true;
      ++n;
    }
  }
  return n;
}

std::size_t edit_distance(std::string_view a, std::string_view b) {
  const auto x = decode_utf8(a);
  const auto y = decode_utf8(b);
  std::vector<std::size_t> prev(y.size() + 1);
  std::vector<std::size_t> cur(y.size() + 1);
  std::iota(prev.begin(), prev.end(), std::size_t{0});
  for (std::size_t i = 1; i <= x.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= y.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (x[i - 1] == y[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[y.size()];
}

bool is_common_english(std::string_view lowered_token) {
  static const std::unordered_set<std::string_view> kWords = {
      "a", "about", "above", "after", "again", "against", "ago", "all", "almost", "alone", "along",
      "already", "also", "always", "am", "an", "and", "angry", "another", "any", "anyone",
      "anything", "are", "around", "as", "ask", "at", "away", "awesome", "back", "bad", "be",
      "because", "been", "before", "being", "best", "better", "between", "big", "both", "boring",
      "bro", "but", "by", "call", "came", "can", "can't", "cannot", "care", "check", "chest",
      "come", "coming", "could", "cough", "day", "did", "didn't", "do", "does", "doesn't",
      "doing", "don't", "done", "down", "drugs", "each", "eat", "enough", "even", "ever", "every",
      "everyone", "everything", "fast", "feel", "feeling", "few", "fine", "first", "for",
      "friend", "friends", "from", "fun", "funny", "future", "get", "give", "go", "god", "going",
      "gone", "good", "got", "great", "group", "guys", "had", "happy", "hard", "has", "hate",
      "have", "he", "health", "hello", "help", "her", "here", "hey", "hi", "him", "his", "home",
      "hope", "hospital", "how", "i", "i'm", "i'll", "i've", "idea", "if", "in", "is", "isn't",
      "it", "it's", "its", "just", "keep", "kind", "know", "last", "late", "later", "leave",
      "less", "let", "life", "like", "little", "long", "look", "lot", "love", "made", "make",
      "many", "may", "me", "medicine", "more", "morning", "most", "much", "must", "my", "need",
      "never", "new", "next", "nice", "night", "no", "normal", "not", "nothing", "now", "of",
      "off", "ok", "okay", "old", "on", "once", "one", "only", "or", "other", "our", "out",
      "over", "pain", "people", "please", "pills", "problem", "really", "right", "sad", "said",
      "same", "say", "school", "see", "she", "should", "sick", "since", "so", "some", "someone",
      "something", "sorry", "still", "stop", "such", "sure", "take", "talk", "tell", "than",
      "thank", "thanks", "that", "that's", "the", "their", "them", "then", "there", "these",
      "they", "thing", "things", "think", "this", "those", "though", "time", "tired", "to",
      "today", "together", "tomorrow", "too", "true", "try", "two", "up", "us", "very", "wait",
      "want", "was", "wasn't", "way", "we", "week", "well", "went", "were", "what", "when",
      "where", "which", "while", "who", "why", "will", "with", "without", "won't", "work",
      "worried", "worse", "would", "yes", "yet", "you", "you're", "your", "yours",
      // chat shorthand
      "u", "ur", "coz", "cuz", "bt", "iz", "im", "pls", "plz", "thx", "lol", "omg", "btw", "idk",
      "gud", "nyc", "hw", "wat", "r", "n", "2day", "2moro", "gonna", "wanna",
      "i’m", "don’t", "can’t", "it’s", "you’re"};
  return kWords.contains(lowered_token);
}

std::string quote(std::string_view s) {
  return nlohmann::json(std::string(s)).dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

}  // namespace sentdiag::text
