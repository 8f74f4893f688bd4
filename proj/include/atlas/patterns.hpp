#pragma once

#include <array>
#include <string>
#include <string_view>

#include "atlas/corpus.hpp"

namespace atlas {

enum class Pattern {
  WordStart = 0,
  WordPart,
  WordEnd,
  Induction,
  Spacing,
  Delimiter,
  Formatting,
  Numeric,
};
constexpr int kPatternCount = 8;
constexpr std::array<Pattern, kPatternCount> kAllPatterns = {
    Pattern::WordStart, Pattern::WordPart,  Pattern::WordEnd,    Pattern::Induction,
    Pattern::Spacing,   Pattern::Delimiter, Pattern::Formatting, Pattern::Numeric,
};
std::string_view pattern_name(Pattern p);

struct PatternLabelSet {
  bool word_start = false;
  bool word_part = false;
  bool word_end = false;
  bool induction = false;
  bool spacing = false;
  bool delimiter = false;
  bool formatting = false;
  bool numeric = false;
  /// Target decodes to letters but the token after it is outside the sampled
  /// window, so word_end could not be decided and was set false.
  bool word_end_truncated = false;
  int preceding_spacing_count = 0;

  bool has(Pattern p) const;
  bool any() const;
};

/// Token-string predicates (decoded byte strings, tokenizer independent).
bool is_spacing_piece(std::string_view piece);
bool is_delimiter_piece(std::string_view piece);
bool is_formatting_piece(std::string_view piece);
bool is_word_start_piece(std::string_view piece);
bool is_letters_piece(std::string_view piece);
bool is_numeric_piece(std::string_view piece);

/// Decoded strings barred from the u, v roles of an induction pattern.
bool in_induction_exclusion_set(std::string_view piece);

/// Bigram "u v" counts as uncommon when q(v|u) is at or below this.
constexpr double kInductionBigramThreshold = 0.05;

/// Classifies the sample's target against all eight patterns. Pure and total
/// on valid samples; word_end uses the sample's lookahead token.
PatternLabelSet classify_patterns(const Sample& sample, const Tokenizer& tokenizer,
                                  const BigramTable& bigrams);

/// Length of the maximal run of spacing tokens at the end of the context.
int count_preceding_spacing(const Sample& sample, const Tokenizer& tokenizer);

}  // namespace atlas
