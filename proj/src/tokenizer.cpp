#include "atlas/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <limits>
#include <map>
#include <sstream>

#include "atlas/io.hpp"

namespace atlas {

namespace {

inline bool is_spacing_char(char c) {
  return c == ' ' || c == '\n' || c == '\t' || c == '\r' || c == '\f';
}
inline bool is_letter(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}
inline bool is_digit(char c) { return c >= '0' && c <= '9'; }

inline std::uint64_t pair_key(int a, int b) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
         static_cast<std::uint32_t>(b);
}

}  // namespace

std::vector<std::string_view> Tokenizer::pretokenize(std::string_view text) {
  std::vector<std::string_view> chunks;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    const std::size_t start = i;
    // A plain space directly before a non-spacing character binds to it.
    if (text[i] == ' ' && i + 1 < n && !is_spacing_char(text[i + 1])) ++i;
    const char c = text[i];
    if (is_spacing_char(c)) {
      while (i < n && is_spacing_char(text[i])) ++i;
      // Leave the final plain space of a run to bind with what follows.
      if (i < n && text[i - 1] == ' ' && i - start > 1) --i;
    } else if (is_letter(c)) {
      while (i < n && is_letter(text[i])) ++i;
    } else if (is_digit(c)) {
      while (i < n && is_digit(text[i])) ++i;
    } else {
      while (i < n && !is_spacing_char(text[i]) && !is_letter(text[i]) && !is_digit(text[i])) ++i;
    }
    chunks.push_back(text.substr(start, i - start));
  }
  return chunks;
}

Tokenizer Tokenizer::byte_level() {
  Tokenizer t;
  t.vocab_.reserve(257);
  for (int b = 0; b < 256; ++b) t.vocab_.push_back(std::string(1, static_cast<char>(b)));
  t.vocab_.emplace_back(kEndOfTextPiece);
  t.special_ids_.insert(kEndOfTextId);
  t.rebuild_piece_index();
  return t;
}

Tokenizer Tokenizer::train_bpe(const std::vector<std::string>& docs, int target_vocab) {
  Tokenizer t = byte_level();
  if (target_vocab <= t.vocab_size()) return t;

  // Unique chunk -> frequency; each chunk kept as a mutable id sequence.
  std::map<std::string, long long> chunk_counts;
  for (const auto& doc : docs) {
    for (const auto chunk : pretokenize(doc)) ++chunk_counts[std::string(chunk)];
  }
  struct Entry {
    std::vector<int> ids;
    long long count;
  };
  std::vector<Entry> entries;
  entries.reserve(chunk_counts.size());
  for (const auto& [chunk, count] : chunk_counts) {
    Entry e;
    e.count = count;
    e.ids.reserve(chunk.size());
    for (const char ch : chunk) e.ids.push_back(static_cast<unsigned char>(ch));
    entries.push_back(std::move(e));
  }

  while (t.vocab_size() < target_vocab) {
    std::map<std::pair<int, int>, long long> pair_counts;
    for (const auto& e : entries) {
      for (std::size_t i = 0; i + 1 < e.ids.size(); ++i) {
        pair_counts[{e.ids[i], e.ids[i + 1]}] += e.count;
      }
    }
    std::pair<int, int> best{-1, -1};
    long long best_count = 1;  // require at least 2 occurrences
    for (const auto& [p, count] : pair_counts) {
      // Ties resolve to the lexicographically smallest id pair (map order).
      if (count > best_count) {
        best = p;
        best_count = count;
      }
    }
    if (best.first < 0) break;

    const int new_id = t.vocab_size();
    t.vocab_.push_back(t.vocab_[static_cast<std::size_t>(best.first)] +
                       t.vocab_[static_cast<std::size_t>(best.second)]);
    const int rank = static_cast<int>(t.merge_rank_.size());
    t.merge_rank_[pair_key(best.first, best.second)] = rank;
    t.merge_result_[pair_key(best.first, best.second)] = new_id;

    for (auto& e : entries) {
      auto& ids = e.ids;
      std::size_t w = 0;
      for (std::size_t r = 0; r < ids.size();) {
        if (r + 1 < ids.size() && ids[r] == best.first && ids[r + 1] == best.second) {
          ids[w++] = new_id;
          r += 2;
        } else {
          ids[w++] = ids[r++];
        }
      }
      ids.resize(w);
    }
  }
  t.rebuild_piece_index();
  return t;
}

void Tokenizer::rebuild_piece_index() {
  piece_to_id_.clear();
  longest_piece_ = 1;
  for (int id = 0; id < vocab_size(); ++id) {
    if (is_special(id)) continue;
    piece_to_id_[vocab_[static_cast<std::size_t>(id)]] = id;
    longest_piece_ = std::max(longest_piece_, vocab_[static_cast<std::size_t>(id)].size());
  }
}

Tokenizer Tokenizer::load_vocab(const std::filesystem::path& path) {
  Tokenizer t;
  const std::string content = read_file(path);
  std::istringstream in(content);
  std::string line;
  std::vector<std::pair<int, std::string>> rows;
  int max_id = -1;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw std::runtime_error("vocab file " + path.string() + ": line " +
                               std::to_string(line_no) + " has no tab separator");
    }
    const int id = std::stoi(line.substr(0, tab));
    std::string bytes = base64_decode(trim(std::string_view(line).substr(tab + 1)));
    if (id < 0) throw std::runtime_error("vocab file: negative id");
    if (bytes.empty()) throw std::runtime_error("vocab file: empty piece for id " + std::to_string(id));
    max_id = std::max(max_id, id);
    rows.emplace_back(id, std::move(bytes));
  }
  if (max_id < 0) throw std::runtime_error("vocab file is empty: " + path.string());
  t.vocab_.assign(static_cast<std::size_t>(max_id) + 1, std::string());
  for (auto& [id, bytes] : rows) {
    if (!t.vocab_[static_cast<std::size_t>(id)].empty()) {
      throw std::runtime_error("vocab file: duplicate id " + std::to_string(id));
    }
    t.vocab_[static_cast<std::size_t>(id)] = std::move(bytes);
  }
  for (int id = 0; id <= max_id; ++id) {
    if (t.vocab_[static_cast<std::size_t>(id)].empty()) {
      throw std::runtime_error("vocab file: missing id " + std::to_string(id));
    }
    if (t.vocab_[static_cast<std::size_t>(id)] == kEndOfTextPiece) t.special_ids_.insert(id);
  }
  t.rebuild_piece_index();
  return t;
}

void Tokenizer::save_vocab(const std::filesystem::path& path) const {
  std::string out;
  for (int id = 0; id < vocab_size(); ++id) {
    out += std::to_string(id);
    out += '\t';
    out += base64_encode(vocab_[static_cast<std::size_t>(id)]);
    out += '\n';
  }
  write_file(path, out);
}

void Tokenizer::encode_chunk(std::string_view chunk, std::size_t text_offset,
                             std::vector<int>& out) const {
  if (!merge_rank_.empty()) {
    std::vector<int> ids;
    ids.reserve(chunk.size());
    for (const char c : chunk) ids.push_back(static_cast<unsigned char>(c));
    for (;;) {
      int best_rank = std::numeric_limits<int>::max();
      std::size_t best_pos = ids.size();
      for (std::size_t i = 0; i + 1 < ids.size(); ++i) {
        const auto it = merge_rank_.find(pair_key(ids[i], ids[i + 1]));
        if (it != merge_rank_.end() && it->second < best_rank) {
          best_rank = it->second;
          best_pos = i;
        }
      }
      if (best_pos == ids.size()) break;
      const int merged = merge_result_.at(pair_key(ids[best_pos], ids[best_pos + 1]));
      ids[best_pos] = merged;
      ids.erase(ids.begin() + static_cast<std::ptrdiff_t>(best_pos) + 1);
    }
    out.insert(out.end(), ids.begin(), ids.end());
    return;
  }
  // Loaded vocabulary: greedy longest match.
  std::size_t i = 0;
  while (i < chunk.size()) {
    const std::size_t max_len = std::min(longest_piece_, chunk.size() - i);
    int id = -1;
    std::size_t len = 0;
    for (std::size_t l = max_len; l >= 1; --l) {
      const auto it = piece_to_id_.find(std::string(chunk.substr(i, l)));
      if (it != piece_to_id_.end()) {
        id = it->second;
        len = l;
        break;
      }
    }
    if (id < 0) {
      throw TokenizeError("no token covers byte at offset " + std::to_string(text_offset + i),
                          text_offset + i);
    }
    out.push_back(id);
    i += len;
  }
}

std::vector<int> Tokenizer::encode(std::string_view text) const {
  std::vector<int> out;
  out.reserve(text.size() / 3 + 1);
  for (const auto chunk : pretokenize(text)) {
    encode_chunk(chunk, static_cast<std::size_t>(chunk.data() - text.data()), out);
  }
  return out;
}

std::string Tokenizer::decode(std::span<const int> ids) const {
  std::string out;
  for (const int id : ids) out += piece(id);
  return out;
}

const std::string& Tokenizer::piece(int id) const {
  if (id < 0 || id >= vocab_size()) {
    throw std::out_of_range("token id " + std::to_string(id) + " outside vocabulary of size " +
                            std::to_string(vocab_size()));
  }
  return vocab_[static_cast<std::size_t>(id)];
}

}  // namespace atlas
