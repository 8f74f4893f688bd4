#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace atlas {

/// Raised when a byte sequence cannot be encoded with the current vocabulary.
class TokenizeError : public std::runtime_error {
 public:
  TokenizeError(const std::string& msg, std::size_t offset)
      : std::runtime_error(msg), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

/// Byte-level tokenizer with an optional learned merge table.
///
/// Ids 0..255 are the raw bytes, id 256 is the end-of-text marker, and higher
/// ids are merges learned by `train_bpe`. A vocabulary loaded from file has no
/// merge table and encodes by greedy longest match instead; either way decode
/// is a plain byte-string lookup, which is all the pattern classifier needs.
class Tokenizer {
 public:
  static constexpr int kEndOfTextId = 256;
  static constexpr std::string_view kEndOfTextPiece = "<|endoftext|>";

  /// Bytes + end-of-text only; always able to encode anything.
  static Tokenizer byte_level();

  /// Learns merges over `docs` until the vocabulary reaches `target_vocab`
  /// (or no pair occurs at least twice). Merges never cross pre-token chunks.
  static Tokenizer train_bpe(const std::vector<std::string>& docs, int target_vocab);

  /// Vocabulary file: one line per token, "<id>\t<base64-of-bytes>".
  static Tokenizer load_vocab(const std::filesystem::path& path);
  void save_vocab(const std::filesystem::path& path) const;

  std::vector<int> encode(std::string_view text) const;
  std::string decode(std::span<const int> ids) const;

  const std::string& piece(int id) const;
  int vocab_size() const { return static_cast<int>(vocab_.size()); }
  bool is_special(int id) const { return special_ids_.count(id) > 0; }
  const std::unordered_set<int>& special_ids() const { return special_ids_; }
  bool has_merges() const { return !merge_rank_.empty(); }

  /// Splits text into chunks that merges never cross: words and numbers with
  /// an optional bound leading space, whitespace runs, punctuation runs.
  static std::vector<std::string_view> pretokenize(std::string_view text);

 private:
  Tokenizer() = default;
  void encode_chunk(std::string_view chunk, std::size_t text_offset, std::vector<int>& out) const;
  void rebuild_piece_index();

  std::vector<std::string> vocab_;
  std::unordered_set<int> special_ids_;
  std::unordered_map<std::uint64_t, int> merge_rank_;  // (left<<32)|right -> rank
  std::unordered_map<std::uint64_t, int> merge_result_;
  std::unordered_map<std::string, int> piece_to_id_;   // longest-match fallback
  std::size_t longest_piece_ = 1;
};

}  // namespace atlas
