#pragma once

#include <cstdio>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "xrisk/common.hpp"
#include "xrisk/text.hpp"
#include "xrisk/vocab.hpp"

namespace xrisk {

struct CalendarDate {
  int year = 0, month = 0, day = 0;
  auto operator<=>(const CalendarDate&) const = default;
};

inline CalendarDate parse_date(const std::string& s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-')
    throw InputError("bad date (want YYYY-MM-DD): " + s);
  CalendarDate d;
  d.year = std::stoi(s.substr(0, 4));
  d.month = std::stoi(s.substr(5, 2));
  d.day = std::stoi(s.substr(8, 2));
  if (d.month < 1 || d.month > 12 || d.day < 1 || d.day > 31)
    throw InputError("bad date components: " + s);
  return d;
}

inline std::string format_date(const CalendarDate& d) {
  char buf[11];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", d.year, d.month, d.day);
  return buf;
}

struct RawFiling {
  std::string doc_id;
  std::string company_id;
  CalendarDate filing_date;
  int year = 0;
  std::string text;
};

struct TokenizedSentence {
  std::vector<int> token_ids;      // length T
  std::vector<int> attention_mask; // length T, 1 = real token
  int n_real = 0;
};

struct EncodedDocument {
  std::string doc_id;
  std::vector<TokenizedSentence> sentences; // length L
  std::vector<int> sentence_mask;           // length L, 1 = real sentence
  int n_sentences = 0;
};

// [CLS] + body (truncated to T-2) + [SEP], padded to length T.
inline TokenizedSentence encode_sentence(const std::string& sentence,
                                         const Vocabulary& vocab,
                                         std::size_t max_tokens = 64) {
  if (max_tokens < 2)
    throw ConfigError("max_tokens must be at least 2 (got " +
                      std::to_string(max_tokens) + ")");
  std::vector<std::string> pieces = wordpiece_tokenize(sentence, vocab);
  if (pieces.size() > max_tokens - 2) pieces.resize(max_tokens - 2);

  TokenizedSentence out;
  out.token_ids.reserve(max_tokens);
  out.token_ids.push_back(vocab.cls_id());
  for (const auto& p : pieces)
    out.token_ids.push_back(vocab.id_or(p, vocab.unk_id()));
  out.token_ids.push_back(vocab.sep_id());
  out.n_real = static_cast<int>(out.token_ids.size());
  out.token_ids.resize(max_tokens, vocab.pad_id());
  out.attention_mask.assign(max_tokens, 0);
  for (int i = 0; i < out.n_real; ++i) out.attention_mask[i] = 1;
  return out;
}

// First L sentences kept in document order; shorter documents are padded
// with empty sentences whose sentence_mask entry is 0.
inline EncodedDocument encode_document(const RawFiling& filing,
                                       const Vocabulary& vocab,
                                       std::size_t max_tokens = 64,
                                       std::size_t max_sentences = 50) {
  EncodedDocument doc;
  doc.doc_id = filing.doc_id;
  std::vector<std::string> sentences = split_sentences(filing.text);
  if (sentences.size() > max_sentences) sentences.resize(max_sentences);
  doc.n_sentences = static_cast<int>(sentences.size());
  doc.sentence_mask.assign(max_sentences, 0);
  doc.sentences.reserve(max_sentences);
  for (std::size_t s = 0; s < max_sentences; ++s) {
    if (s < sentences.size()) {
      doc.sentences.push_back(encode_sentence(sentences[s], vocab, max_tokens));
      doc.sentence_mask[s] = 1;
    } else {
      doc.sentences.push_back(encode_sentence("", vocab, max_tokens));
    }
  }
  return doc;
}

// Corpus files are JSON lines, one filing per line.
inline RawFiling filing_from_json(const nlohmann::json& j) {
  RawFiling f;
  try {
    f.doc_id = j.at("doc_id").get<std::string>();
    f.company_id = j.at("company_id").get<std::string>();
    f.filing_date = parse_date(j.at("filing_date").get<std::string>());
    f.year = j.at("year").get<int>();
    f.text = j.at("text").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("bad filing record: ") + e.what());
  }
  if (f.filing_date.year != f.year)
    throw InputError("filing_date year does not match year field for doc " +
                     f.doc_id);
  return f;
}

inline nlohmann::json filing_to_json(const RawFiling& f) {
  return nlohmann::json{{"doc_id", f.doc_id},
                        {"company_id", f.company_id},
                        {"filing_date", format_date(f.filing_date)},
                        {"year", f.year},
                        {"text", f.text}};
}

inline std::vector<RawFiling> load_corpus(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read corpus file: " + path);
  std::vector<RawFiling> out;
  std::string line;
  std::size_t lineno = 0;
  std::map<std::string, bool> seen;
  while (std::getline(f, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw InputError(path + ":" + std::to_string(lineno) +
                       ": invalid JSON: " + e.what());
    }
    RawFiling filing = filing_from_json(j);
    if (seen.count(filing.doc_id))
      throw InputError("duplicate doc_id in corpus: " + filing.doc_id);
    seen[filing.doc_id] = true;
    out.push_back(std::move(filing));
  }
  return out;
}

inline void save_corpus(const std::vector<RawFiling>& corpus,
                        const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write corpus file: " + path);
  for (const auto& filing : corpus) f << filing_to_json(filing).dump() << '\n';
}

// Optional cache of encoded documents, one JSON object per line.
inline void save_encoded(const std::vector<EncodedDocument>& docs,
                         const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write encoded cache: " + path);
  for (const auto& d : docs) {
    nlohmann::json j;
    j["doc_id"] = d.doc_id;
    j["sentence_mask"] = d.sentence_mask;
    j["n_sentences"] = d.n_sentences;
    auto& sents = j["sentences"] = nlohmann::json::array();
    for (const auto& s : d.sentences) {
      sents.push_back({{"token_ids", s.token_ids},
                       {"attention_mask", s.attention_mask},
                       {"n_real", s.n_real}});
    }
    f << j.dump() << '\n';
  }
}

}  // namespace xrisk
