// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The mfm Authors

#include "mfm/tokenizer.hpp"

#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace mfm {
namespace {

const std::vector<std::string>& reserved_pieces() {
  static const std::vector<std::string> r = {"<pad>", "</s>", "<unk>"};
  return r;
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    const auto start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) words.emplace_back(text.substr(start, i - start));
  }
  return words;
}

}  // namespace

std::vector<std::string> utf8_chars(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto lead = static_cast<unsigned char>(text[i]);
    std::size_t len = 1;
    if (lead >= 0xF0) {
      len = 4;
    } else if (lead >= 0xE0) {
      len = 3;
    } else if (lead >= 0xC0) {
      len = 2;
    }
    if (i + len > text.size()) len = 1;
    for (std::size_t k = 1; k < len; ++k) {
      if ((static_cast<unsigned char>(text[i + k]) & 0xC0) != 0x80) {
        len = 1;
        break;
      }
    }
    out.emplace_back(text.substr(i, len));
    i += len;
  }
  return out;
}

Vocabulary::Vocabulary(std::vector<std::string> pieces) : pieces_(std::move(pieces)) {
  if (pieces_.size() < 4) throw ConfigError("vocabulary needs at least 4 pieces");
  for (std::size_t i = 0; i < reserved_pieces().size(); ++i) {
    if (pieces_[i] != reserved_pieces()[i]) {
      throw ConfigError("vocabulary line " + std::to_string(i + 1) + " must be " +
                        reserved_pieces()[i]);
    }
  }
  for (std::size_t i = 0; i < pieces_.size(); ++i) {
    if (pieces_[i].empty()) throw ConfigError("empty vocabulary piece at id " + std::to_string(i));
    if (!ids_.emplace(pieces_[i], static_cast<int>(i)).second) {
      throw ConfigError("duplicate vocabulary piece '" + pieces_[i] + "'");
    }
    if (i >= reserved_pieces().size()) {
      max_piece_length_ = std::max(max_piece_length_, utf8_chars(pieces_[i]).size());
    }
  }
}

const std::string& Vocabulary::piece(int id) const {
  if (id < 0 || id >= size()) throw RangeError("token id " + std::to_string(id) + " out of range");
  return pieces_[static_cast<std::size_t>(id)];
}

int Vocabulary::id(std::string_view piece) const {
  auto it = ids_.find(std::string(piece));
  return it == ids_.end() ? -1 : it->second;
}

std::string Vocabulary::to_text() const {
  std::string out;
  for (const auto& p : pieces_) out += p + '\n';
  return out;
}

Vocabulary Vocabulary::from_text(const std::string& text) {
  std::vector<std::string> pieces;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    pieces.push_back(line);
  }
  return Vocabulary(std::move(pieces));
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << to_text();
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_text(buf.str());
}

void TokenizedField::append(const TokenizedField& other, int whole_word_offset) {
  token_ids.insert(token_ids.end(), other.token_ids.begin(), other.token_ids.end());
  category_ids.insert(category_ids.end(), other.category_ids.begin(), other.category_ids.end());
  for (int w : other.whole_word_ids) whole_word_ids.push_back(w + whole_word_offset);
}

Vocabulary build_vocab(const std::vector<std::string>& texts, int target_size) {
  // Word frequency table in first-occurrence order.
  std::vector<std::vector<std::string>> words;
  std::vector<long> freq;
  std::map<std::string, std::size_t> word_slot;
  std::set<std::string> alphabet;
  for (const auto& text : texts) {
    for (const auto& w : split_words(text)) {
      auto [it, inserted] = word_slot.emplace(w, words.size());
      if (inserted) {
        std::vector<std::string> symbols{std::string(kWordMarker)};
        for (auto& c : utf8_chars(w)) {
          alphabet.insert(c);
          symbols.push_back(std::move(c));
        }
        words.push_back(std::move(symbols));
        freq.push_back(0);
      }
      ++freq[it->second];
    }
  }
  if (words.empty()) throw ConfigError("cannot build a vocabulary from an empty corpus");
  alphabet.erase(std::string(kWordMarker));
  const auto minimum = 4 + static_cast<int>(alphabet.size());
  if (target_size < minimum) {
    throw ConfigError("vocabulary target size " + std::to_string(target_size) +
                      " is below the minimum " + std::to_string(minimum) +
                      " (4 + distinct characters)");
  }

  std::vector<std::string> pieces = reserved_pieces();
  pieces.emplace_back(kWordMarker);
  pieces.insert(pieces.end(), alphabet.begin(), alphabet.end());
  std::set<std::string> known(pieces.begin(), pieces.end());

  while (static_cast<int>(pieces.size()) < target_size) {
    std::map<std::pair<std::string, std::string>, long> counts;
    for (std::size_t w = 0; w < words.size(); ++w) {
      const auto& s = words[w];
      for (std::size_t i = 0; i + 1 < s.size(); ++i) counts[{s[i], s[i + 1]}] += freq[w];
    }
    // Highest count wins; std::map order breaks ties lexicographically.
    const std::pair<std::string, std::string>* best = nullptr;
    long best_count = 1;
    for (const auto& [pair, count] : counts) {
      if (count > best_count && !known.count(pair.first + pair.second)) {
        best = &pair;
        best_count = count;
      }
    }
    if (!best) break;
    const auto left = best->first;
    const auto right = best->second;
    const auto merged = left + right;
    pieces.push_back(merged);
    known.insert(merged);
    for (auto& s : words) {
      std::vector<std::string> next;
      next.reserve(s.size());
      for (std::size_t i = 0; i < s.size(); ++i) {
        if (i + 1 < s.size() && s[i] == left && s[i + 1] == right) {
          next.push_back(merged);
          ++i;
        } else {
          next.push_back(s[i]);
        }
      }
      s = std::move(next);
    }
  }
  return Vocabulary(std::move(pieces));
}

TokenizedField encode(const Vocabulary& vocab, std::string_view text) {
  TokenizedField field;
  int word = 0;
  for (const auto& w : split_words(text)) {
    auto chars = utf8_chars(w);
    chars.insert(chars.begin(), std::string(kWordMarker));
    std::size_t i = 0;
    while (i < chars.size()) {
      int found = -1;
      std::size_t found_len = 0;
      std::string candidate;
      const auto limit = std::min(chars.size() - i, vocab.max_piece_length());
      for (std::size_t len = 1; len <= limit; ++len) {
        candidate += chars[i + len - 1];
        const int id = vocab.id(candidate);
        if (id >= 3) {
          found = id;
          found_len = len;
        }
      }
      if (found < 0) {
        found = kUnkId;
        found_len = 1;
      }
      field.token_ids.push_back(found);
      field.whole_word_ids.push_back(word);
      field.category_ids.push_back(0);
      i += found_len;
    }
    ++word;
  }
  return field;
}

std::string decode(const Vocabulary& vocab, const std::vector<int>& ids) {
  std::string out;
  for (std::size_t pos = 0; pos < ids.size(); ++pos) {
    const int id = ids[pos];
    if (id < 0 || id >= vocab.size()) {
      throw DecodeError("token id " + std::to_string(id) + " at position " + std::to_string(pos) +
                        " is outside the vocabulary");
    }
    if (id == kEosId) break;
    if (id == kPadId) continue;
    const auto& piece = vocab.piece(id);
    std::size_t start = 0;
    while (true) {
      const auto m = piece.find(kWordMarker, start);
      if (m == std::string::npos) {
        out.append(piece, start);
        break;
      }
      out.append(piece, start, m - start);
      out += ' ';
      start = m + kWordMarker.size();
    }
  }
  if (!out.empty() && out.front() == ' ') out.erase(out.begin());
  return out;
}

}  // namespace mfm
