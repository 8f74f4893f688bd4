#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "atlas/tokenizer.hpp"

namespace atlas {

struct Document {
  std::vector<int> tokens;
  std::string tag;
  std::string source;  // path or synthetic label
};

struct Corpus {
  std::vector<Document> docs;
  bool empty() const { return docs.empty(); }
  long long total_tokens() const;
};

/// One (x, y) analysis unit: a context, the target that follows it, and
/// enough provenance to classify and aggregate it later.
struct Sample {
  std::vector<int> context;     // 1..K tokens
  int target = -1;
  std::string tag;
  long long doc_position = 0;   // position of the target within its document
  int lookahead = -1;           // token after the target, -1 when unavailable
};

/// Manifest: one "path<TAB>tag" entry per line, '#' comments allowed.
std::vector<std::pair<std::string, std::string>> read_manifest(const std::filesystem::path& path);

/// Tokenizes each listed file into a Document. Empty files are skipped (a
/// warning is recorded in `warnings` when given); unreadable files throw.
Corpus load_corpus(const std::vector<std::pair<std::string, std::string>>& entries,
                   const Tokenizer& tokenizer, std::vector<std::string>* warnings = nullptr);

/// Draws `n_per_tag` samples for every tag, positions uniform without
/// replacement where possible (falls back to with-replacement and sets
/// `*with_replacement` when a tag has too few positions). Deterministic in
/// `seed`; contexts are the up-to-`max_context` tokens before the target.
std::vector<Sample> sample_contexts(const Corpus& corpus, int n_per_tag, int max_context,
                                    std::uint64_t seed, bool* with_replacement = nullptr);

/// Maximum-likelihood conditional bigram probabilities q(v|u) over adjacent
/// token pairs; unobserved pairs are 0 (no smoothing).
class BigramTable {
 public:
  static BigramTable estimate(const Corpus& corpus);

  double q(int u, int v) const;
  long long pair_count(int u, int v) const;
  long long first_count(int u) const;
  const std::unordered_map<int, long long>& first_counts() const { return first_counts_; }

 private:
  std::unordered_map<std::uint64_t, long long> pair_counts_;
  std::unordered_map<int, long long> first_counts_;
};

}  // namespace atlas
