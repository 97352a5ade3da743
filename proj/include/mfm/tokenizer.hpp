// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The mfm Authors

#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mfm/common.hpp"

namespace mfm {

inline constexpr int kPadId = 0;  // also the decoder start token
inline constexpr int kEosId = 1;
inline constexpr int kUnkId = 2;

// Piece that marks the start of a whitespace-delimited word.
inline constexpr std::string_view kWordMarker = "\xE2\x96\x81";  // U+2581

// Bijective piece <-> id table. Ids 0..2 are pad, eos and unknown.
class Vocabulary {
 public:
  explicit Vocabulary(std::vector<std::string> pieces);

  int size() const { return static_cast<int>(pieces_.size()); }
  const std::string& piece(int id) const;
  // -1 when absent.
  int id(std::string_view piece) const;
  const std::vector<std::string>& pieces() const { return pieces_; }
  // Longest piece, in code points.
  std::size_t max_piece_length() const { return max_piece_length_; }

  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);
  static Vocabulary from_text(const std::string& text);
  std::string to_text() const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.pieces_ == b.pieces_; }

 private:
  std::vector<std::string> pieces_;
  std::unordered_map<std::string, int> ids_;
  std::size_t max_piece_length_ = 1;
};

// category_ids: 0 text, 1 visual.
struct TokenizedField {
  std::vector<int> token_ids;
  std::vector<int> whole_word_ids;
  std::vector<int> category_ids;

  std::size_t size() const { return token_ids.size(); }
  void append(const TokenizedField& other, int whole_word_offset);
};

// UTF-8 code points of `text`; invalid bytes become single-byte units.
std::vector<std::string> utf8_chars(std::string_view text);

// Greedy byte-pair merges over whitespace-split words until `target_size`
// pieces exist or no adjacent pair occurs at least twice.
Vocabulary build_vocab(const std::vector<std::string>& texts, int target_size);

// Greedy longest-match segmentation. Whole-word ids start at 0 and advance
// per whitespace-delimited word.
TokenizedField encode(const Vocabulary& vocab, std::string_view text);

// Stops at the first eos; pad ids are skipped.
std::string decode(const Vocabulary& vocab, const std::vector<int>& ids);

}  // namespace mfm
