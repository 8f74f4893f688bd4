#include "atlas/patterns.hpp"

#include <unordered_set>

namespace atlas {

namespace {

inline bool is_spacing_char(char c) {
  return c == ' ' || c == '\n' || c == '\t' || c == '\r' || c == '\f';
}
inline bool is_letter(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}
inline bool is_digit(char c) { return c >= '0' && c <= '9'; }

const std::unordered_set<std::string_view>& delimiter_set() {
  static const std::unordered_set<std::string_view> set = {
      // left
      "<", " <", "{", " {", "(", " (", "[", " [", "</", "{\"", " $",
      // right
      ">", " >", "}", " }", ")", " )", "]", " ]", "),", "],", "):", ").", "))", ");", "%)", "$",
  };
  return set;
}

const std::unordered_set<std::string_view>& formatting_set() {
  static const std::unordered_set<std::string_view> set = {
      "~", "\\\\", " \\\\", "/", "//", " //", "://", "-", " -",
      "\xE2\x80\x94", " \xE2\x80\x94",  // em dash, with and without space
      "_", "========", "--", "----", "--------", "----------------",
      "**", "****", "********", "####",
      ".", ",", ":", "::", " :", ";", " ;", "\",", "<|endoftext|>",
      "=\"", "\":\"", "|", "'", "\"", "->", " ->", "^", " %",
  };
  return set;
}

const std::unordered_set<std::string_view>& exclusion_set() {
  static const std::unordered_set<std::string_view> set = {
      " ", "\n", ",", ".", "the", "to", ":", "and", "by", "in", "a", "be",
  };
  return set;
}

}  // namespace

std::string_view pattern_name(Pattern p) {
  switch (p) {
    case Pattern::WordStart: return "word_start";
    case Pattern::WordPart: return "word_part";
    case Pattern::WordEnd: return "word_end";
    case Pattern::Induction: return "induction";
    case Pattern::Spacing: return "spacing";
    case Pattern::Delimiter: return "delimiter";
    case Pattern::Formatting: return "formatting";
    case Pattern::Numeric: return "numeric";
  }
  return "unknown";
}

bool PatternLabelSet::has(Pattern p) const {
  switch (p) {
    case Pattern::WordStart: return word_start;
    case Pattern::WordPart: return word_part;
    case Pattern::WordEnd: return word_end;
    case Pattern::Induction: return induction;
    case Pattern::Spacing: return spacing;
    case Pattern::Delimiter: return delimiter;
    case Pattern::Formatting: return formatting;
    case Pattern::Numeric: return numeric;
  }
  return false;
}

bool PatternLabelSet::any() const {
  return word_start || word_part || word_end || induction || spacing || delimiter || formatting ||
         numeric;
}

bool is_spacing_piece(std::string_view piece) {
  if (piece.empty()) return false;
  for (const char c : piece) {
    if (!is_spacing_char(c)) return false;
  }
  return true;
}

bool is_delimiter_piece(std::string_view piece) { return delimiter_set().count(piece) > 0; }

bool is_formatting_piece(std::string_view piece) { return formatting_set().count(piece) > 0; }

bool is_word_start_piece(std::string_view piece) {
  if (piece.size() < 2 || piece.front() != ' ') return false;
  for (std::size_t i = 1; i < piece.size(); ++i) {
    if (!is_letter(piece[i])) return false;
  }
  return true;
}

bool is_letters_piece(std::string_view piece) {
  if (piece.empty()) return false;
  for (const char c : piece) {
    if (!is_letter(c)) return false;
  }
  return true;
}

bool is_numeric_piece(std::string_view piece) {
  // Digits once plain spaces are removed.
  bool saw_digit = false;
  for (const char c : piece) {
    if (c == ' ') continue;
    if (!is_digit(c)) return false;
    saw_digit = true;
  }
  return saw_digit;
}

bool in_induction_exclusion_set(std::string_view piece) { return exclusion_set().count(piece) > 0; }

PatternLabelSet classify_patterns(const Sample& sample, const Tokenizer& tokenizer,
                                  const BigramTable& bigrams) {
  PatternLabelSet labels;
  const std::string& target_piece = tokenizer.piece(sample.target);

  labels.spacing = is_spacing_piece(target_piece);
  labels.delimiter = is_delimiter_piece(target_piece);
  labels.formatting = is_formatting_piece(target_piece);
  labels.word_start = is_word_start_piece(target_piece);
  labels.numeric = is_numeric_piece(target_piece);

  const bool letters_only = is_letters_piece(target_piece);
  if (letters_only) {
    if (sample.lookahead >= 0) {
      const std::string& next_piece = tokenizer.piece(sample.lookahead);
      labels.word_end = is_formatting_piece(next_piece) || is_delimiter_piece(next_piece) ||
                        is_spacing_piece(next_piece);
    } else {
      labels.word_end_truncated = true;
    }
  }

  // Induction: the context ends in u, an earlier (u, y) bigram exists, the
  // bigram is uncommon, and neither u nor y is excluded.
  const auto& ctx = sample.context;
  if (ctx.size() >= 3) {
    const int u = ctx.back();
    if (!in_induction_exclusion_set(tokenizer.piece(u)) &&
        !in_induction_exclusion_set(target_piece) &&
        bigrams.q(u, sample.target) <= kInductionBigramThreshold) {
      for (std::size_t i = 0; i + 2 < ctx.size(); ++i) {
        if (ctx[i] == u && ctx[i + 1] == sample.target) {
          labels.induction = true;
          break;
        }
      }
    }
  }

  // Word parts exclude word endings and induction tokens.
  labels.word_part = letters_only && !labels.word_end && !labels.induction;

  labels.preceding_spacing_count = count_preceding_spacing(sample, tokenizer);
  return labels;
}

int count_preceding_spacing(const Sample& sample, const Tokenizer& tokenizer) {
  int count = 0;
  for (auto it = sample.context.rbegin(); it != sample.context.rend(); ++it) {
    if (!is_spacing_piece(tokenizer.piece(*it))) break;
    ++count;
  }
  return count;
}

}  // namespace atlas
