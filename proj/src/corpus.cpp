#include "atlas/corpus.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "atlas/io.hpp"
#include "atlas/rng.hpp"

namespace atlas {

long long Corpus::total_tokens() const {
  long long n = 0;
  for (const auto& d : docs) n += static_cast<long long>(d.tokens.size());
  return n;
}

std::vector<std::pair<std::string, std::string>> read_manifest(const std::filesystem::path& path) {
  std::vector<std::pair<std::string, std::string>> entries;
  std::istringstream in(read_file(path));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto stripped = trim(line);
    if (stripped.empty() || stripped.front() == '#') continue;
    const auto tab = stripped.find('\t');
    if (tab == std::string_view::npos) {
      throw std::runtime_error("manifest " + path.string() + ": line " + std::to_string(line_no) +
                               " is not 'path<TAB>tag'");
    }
    entries.emplace_back(std::string(trim(stripped.substr(0, tab))),
                         std::string(trim(stripped.substr(tab + 1))));
  }
  return entries;
}

Corpus load_corpus(const std::vector<std::pair<std::string, std::string>>& entries,
                   const Tokenizer& tokenizer, std::vector<std::string>* warnings) {
  Corpus corpus;
  for (const auto& [path, tag] : entries) {
    const std::string text = read_file(path);  // throws naming the path
    if (text.empty()) {
      if (warnings) warnings->push_back("skipping empty file: " + path);
      continue;
    }
    Document doc;
    doc.tokens = tokenizer.encode(text);
    doc.tag = tag;
    doc.source = path;
    corpus.docs.push_back(std::move(doc));
  }
  return corpus;
}

std::vector<Sample> sample_contexts(const Corpus& corpus, int n_per_tag, int max_context,
                                    std::uint64_t seed, bool* with_replacement) {
  if (n_per_tag < 1) throw std::invalid_argument("sample_contexts: n_per_tag must be >= 1");
  if (max_context < 1) throw std::invalid_argument("sample_contexts: max_context must be >= 1");
  if (with_replacement) *with_replacement = false;

  // Per tag, every admissible target position: (doc index, target index >= 1).
  std::map<std::string, std::vector<std::pair<std::size_t, long long>>> positions;
  for (std::size_t d = 0; d < corpus.docs.size(); ++d) {
    const auto& doc = corpus.docs[d];
    for (long long p = 1; p < static_cast<long long>(doc.tokens.size()); ++p) {
      positions[doc.tag].emplace_back(d, p);
    }
  }
  if (positions.empty()) {
    throw std::runtime_error("sample_contexts: corpus has no document of length >= 2");
  }

  std::vector<Sample> samples;
  samples.reserve(positions.size() * static_cast<std::size_t>(n_per_tag));
  std::size_t tag_index = 0;
  for (auto& [tag, pool] : positions) {
    Rng rng = Rng(seed).derive(0x5A4D504Cull, tag_index++);
    std::vector<std::size_t> chosen;
    const std::size_t want = static_cast<std::size_t>(n_per_tag);
    if (pool.size() >= want) {
      // Partial Fisher-Yates for the first `want` slots.
      std::vector<std::size_t> idx(pool.size());
      for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
      for (std::size_t i = 0; i < want; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.uniform_u64(idx.size() - i));
        std::swap(idx[i], idx[j]);
        chosen.push_back(idx[i]);
      }
    } else {
      if (with_replacement) *with_replacement = true;
      for (std::size_t i = 0; i < want; ++i) {
        chosen.push_back(static_cast<std::size_t>(rng.uniform_u64(pool.size())));
      }
    }
    for (const std::size_t c : chosen) {
      const auto [d, p] = pool[c];
      const auto& doc = corpus.docs[d];
      Sample s;
      const long long ctx_start = std::max<long long>(0, p - max_context);
      s.context.assign(doc.tokens.begin() + ctx_start, doc.tokens.begin() + p);
      s.target = doc.tokens[static_cast<std::size_t>(p)];
      s.tag = tag;
      s.doc_position = p;
      s.lookahead = (p + 1 < static_cast<long long>(doc.tokens.size()))
                        ? doc.tokens[static_cast<std::size_t>(p + 1)]
                        : -1;
      samples.push_back(std::move(s));
    }
  }
  return samples;
}

BigramTable BigramTable::estimate(const Corpus& corpus) {
  if (corpus.empty()) throw std::runtime_error("bigram estimation requires a non-empty corpus");
  BigramTable table;
  for (const auto& doc : corpus.docs) {
    for (std::size_t i = 0; i + 1 < doc.tokens.size(); ++i) {
      const int u = doc.tokens[i];
      const int v = doc.tokens[i + 1];
      ++table.pair_counts_[(static_cast<std::uint64_t>(static_cast<std::uint32_t>(u)) << 32) |
                           static_cast<std::uint32_t>(v)];
      ++table.first_counts_[u];
    }
  }
  return table;
}

double BigramTable::q(int u, int v) const {
  const auto fc = first_counts_.find(u);
  if (fc == first_counts_.end()) return 0.0;
  const auto pc = pair_counts_.find(
      (static_cast<std::uint64_t>(static_cast<std::uint32_t>(u)) << 32) |
      static_cast<std::uint32_t>(v));
  if (pc == pair_counts_.end()) return 0.0;
  return static_cast<double>(pc->second) / static_cast<double>(fc->second);
}

long long BigramTable::pair_count(int u, int v) const {
  const auto pc = pair_counts_.find(
      (static_cast<std::uint64_t>(static_cast<std::uint32_t>(u)) << 32) |
      static_cast<std::uint32_t>(v));
  return pc == pair_counts_.end() ? 0 : pc->second;
}

long long BigramTable::first_count(int u) const {
  const auto fc = first_counts_.find(u);
  return fc == first_counts_.end() ? 0 : fc->second;
}

}  // namespace atlas
