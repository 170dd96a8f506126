#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "xrisk/common.hpp"
#include "xrisk/text.hpp"

namespace xrisk {

inline constexpr const char* kPadToken = "[PAD]";
inline constexpr const char* kUnkToken = "[UNK]";
inline constexpr const char* kClsToken = "[CLS]";
inline constexpr const char* kSepToken = "[SEP]";

class Vocabulary {
 public:
  Vocabulary() = default;

  explicit Vocabulary(std::vector<std::string> tokens)
      : tokens_(std::move(tokens)) {
    for (std::size_t i = 0; i < tokens_.size(); ++i) id_of_[tokens_[i]] = static_cast<int>(i);
    if (id_of_.size() != tokens_.size())
      throw InputError("vocabulary contains duplicate tokens");
    pad_id_ = require(kPadToken);
    unk_id_ = require(kUnkToken);
    cls_id_ = require(kClsToken);
    sep_id_ = require(kSepToken);
  }

  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }

  int id_or(const std::string& tok, int fallback) const {
    auto it = id_of_.find(tok);
    return it == id_of_.end() ? fallback : it->second;
  }
  bool contains(const std::string& tok) const { return id_of_.count(tok) != 0; }

  int pad_id() const { return pad_id_; }
  int unk_id() const { return unk_id_; }
  int cls_id() const { return cls_id_; }
  int sep_id() const { return sep_id_; }

  bool is_special(int id) const {
    return id == pad_id_ || id == unk_id_ || id == cls_id_ || id == sep_id_;
  }
  static bool is_special_token(const std::string& tok) {
    return tok == kPadToken || tok == kUnkToken || tok == kClsToken ||
           tok == kSepToken;
  }

  void save(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write vocabulary file: " + path);
    for (const auto& t : tokens_) f << t << '\n';
  }

  static Vocabulary load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot read vocabulary file: " + path);
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(f, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) tokens.push_back(line);
    }
    return Vocabulary(std::move(tokens));
  }

 private:
  int require(const std::string& tok) const {
    auto it = id_of_.find(tok);
    if (it == id_of_.end())
      throw InputError("vocabulary is missing special token " + tok);
    return it->second;
  }

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> id_of_;
  int pad_id_ = 0, unk_id_ = 0, cls_id_ = 0, sep_id_ = 0;
};

// Specials first, then whole words by descending frequency with lexicographic
// tie-break, truncated to max_size. std::map keeps the count pass
// deterministic regardless of hashing.
inline Vocabulary build_vocabulary(const std::vector<std::string>& sentences,
                                   std::size_t max_size) {
  if (max_size < 4)
    throw ConfigError("vocabulary max_size must be at least 4 (got " +
                      std::to_string(max_size) + ")");
  std::map<std::string, std::size_t> counts;
  for (const auto& s : sentences)
    for (const auto& w : split_whitespace(s)) ++counts[w];

  std::vector<std::pair<std::string, std::size_t>> by_freq(counts.begin(),
                                                           counts.end());
  std::sort(by_freq.begin(), by_freq.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  std::vector<std::string> tokens = {kPadToken, kUnkToken, kClsToken,
                                     kSepToken};
  for (const auto& [w, n] : by_freq) {
    (void)n;
    if (tokens.size() >= max_size) break;
    if (Vocabulary::is_special_token(w)) continue;
    tokens.push_back(w);
  }
  return Vocabulary(std::move(tokens));
}

// Greedy longest-match-first WordPiece. Continuation pieces carry the "##"
// prefix; a word with no valid segmentation becomes a single [UNK].
inline std::vector<std::string> wordpiece_tokenize(const std::string& sentence,
                                                   const Vocabulary& vocab) {
  std::vector<std::string> out;
  for (const auto& word : split_whitespace(sentence)) {
    std::vector<std::string> pieces;
    std::size_t start = 0;
    bool ok = true;
    while (start < word.size()) {
      std::size_t end = word.size();
      std::string match;
      while (end > start) {
        std::string piece = word.substr(start, end - start);
        if (start > 0) piece = "##" + piece;
        if (vocab.contains(piece)) {
          match = std::move(piece);
          break;
        }
        --end;
      }
      if (match.empty()) {
        ok = false;
        break;
      }
      pieces.push_back(std::move(match));
      start = end;
    }
    if (ok && !pieces.empty()) {
      for (auto& p : pieces) out.push_back(std::move(p));
    } else {
      out.push_back(kUnkToken);
    }
  }
  return out;
}

// Inverse of wordpiece_tokenize under full vocabulary coverage: continuation
// pieces are glued back, everything else is space-joined.
inline std::string detokenize(const std::vector<std::string>& pieces) {
  std::string out;
  for (const auto& p : pieces) {
    if (Vocabulary::is_special_token(p)) continue;
    if (p.rfind("##", 0) == 0) {
      out += p.substr(2);
    } else {
      if (!out.empty()) out += ' ';
      out += p;
    }
  }
  return out;
}

}  // namespace xrisk
