#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "xrisk/encode.hpp"
#include "xrisk/text.hpp"
#include "xrisk/vocab.hpp"

using namespace xrisk;

TEST(SplitSentences, EmptyInput) {
  EXPECT_TRUE(split_sentences("").empty());
}

TEST(SplitSentences, BasicTerminators) {
  auto got = split_sentences("Revenue fell. Costs rose.");
  ASSERT_EQ(got.size(), 2u);
  EXPECT_EQ(got[0], "revenue fell.");
  EXPECT_EQ(got[1], "costs rose.");
}

TEST(SplitSentences, NoSplitInsideNumbers) {
  auto got = split_sentences("Loss of $3.5 million occurred.");
  ASSERT_EQ(got.size(), 1u);
  EXPECT_EQ(got[0], "loss of $3.5 million occurred.");
}

TEST(SplitSentences, QuestionAndBang) {
  auto got = split_sentences("Why? Because! Growth stalled");
  ASSERT_EQ(got.size(), 3u);
  EXPECT_EQ(got[0], "why?");
  EXPECT_EQ(got[1], "because!");
  EXPECT_EQ(got[2], "growth stalled");
}

TEST(SplitSentences, ConsecutiveTerminators) {
  auto got = split_sentences("Wait... done. ");
  ASSERT_EQ(got.size(), 2u);
  EXPECT_EQ(got[0], "wait...");
  EXPECT_EQ(got[1], "done.");
}

TEST(BuildVocabulary, FrequencyOrder) {
  auto vocab = build_vocabulary({"a b a"}, 6);
  ASSERT_EQ(vocab.size(), 6u);
  EXPECT_EQ(vocab.token(0), "[PAD]");
  EXPECT_EQ(vocab.token(1), "[UNK]");
  EXPECT_EQ(vocab.token(2), "[CLS]");
  EXPECT_EQ(vocab.token(3), "[SEP]");
  EXPECT_EQ(vocab.token(4), "a");
  EXPECT_EQ(vocab.token(5), "b");
}

TEST(BuildVocabulary, EmptyCorpusIsSpecialsOnly) {
  auto vocab = build_vocabulary({}, 100);
  EXPECT_EQ(vocab.size(), 4u);
}

TEST(BuildVocabulary, LexicographicTieBreak) {
  auto vocab = build_vocabulary({"y x"}, 6);
  EXPECT_EQ(vocab.token(4), "x");
  EXPECT_EQ(vocab.token(5), "y");
}

TEST(BuildVocabulary, TruncatesToMaxSize) {
  auto vocab = build_vocabulary({"a a a b b c"}, 5);
  ASSERT_EQ(vocab.size(), 5u);
  EXPECT_EQ(vocab.token(4), "a");
  EXPECT_FALSE(vocab.contains("b"));
}

TEST(BuildVocabulary, MaxSizeBelowSpecialsRejected) {
  EXPECT_THROW(build_vocabulary({"a"}, 3), ConfigError);
}

TEST(BuildVocabulary, DeterministicAcrossRepeats) {
  std::vector<std::string> corpus = {"m n o p", "p o n", "o p", "p"};
  auto a = build_vocabulary(corpus, 10);
  auto b = build_vocabulary(corpus, 10);
  EXPECT_EQ(a.tokens(), b.tokens());
}

TEST(Wordpiece, WholeWordHit) {
  Vocabulary vocab({"[PAD]", "[UNK]", "[CLS]", "[SEP]", "profit"});
  auto got = wordpiece_tokenize("profit", vocab);
  ASSERT_EQ(got.size(), 1u);
  EXPECT_EQ(got[0], "profit");
}

TEST(Wordpiece, GreedyLongestMatch) {
  Vocabulary vocab({"[PAD]", "[UNK]", "[CLS]", "[SEP]", "un", "##hedge", "##d"});
  auto got = wordpiece_tokenize("unhedged", vocab);
  ASSERT_EQ(got.size(), 3u);
  EXPECT_EQ(got[0], "un");
  EXPECT_EQ(got[1], "##hedge");
  EXPECT_EQ(got[2], "##d");
}

TEST(Wordpiece, UnknownFallsBackToUnk) {
  Vocabulary vocab({"[PAD]", "[UNK]", "[CLS]", "[SEP]", "a"});
  auto got = wordpiece_tokenize("qqq", vocab);
  ASSERT_EQ(got.size(), 1u);
  EXPECT_EQ(got[0], "[UNK]");
}

TEST(Wordpiece, PrefersLongerPiece) {
  Vocabulary vocab({"[PAD]", "[UNK]", "[CLS]", "[SEP]", "inter", "interest",
                    "##est"});
  auto got = wordpiece_tokenize("interest", vocab);
  ASSERT_EQ(got.size(), 1u);
  EXPECT_EQ(got[0], "interest");
}

TEST(Wordpiece, RoundTripWithFullCoverage) {
  std::vector<std::string> corpus = {"net revenue grew.", "margins shrank."};
  auto vocab = build_vocabulary(corpus, 64);
  for (const auto& sentence : corpus) {
    auto pieces = wordpiece_tokenize(sentence, vocab);
    EXPECT_EQ(detokenize(pieces), sentence);
  }
}

namespace {
Vocabulary tiny_vocab() {
  return build_vocabulary({"one two three four five six seven eight nine ten"},
                          20);
}
}  // namespace

TEST(EncodeSentence, TruncatesLongSentence) {
  auto vocab = tiny_vocab();
  std::string sentence;
  for (int i = 0; i < 100; ++i) sentence += "one ";
  auto enc = encode_sentence(sentence, vocab, 64);
  EXPECT_EQ(enc.n_real, 64);
  EXPECT_EQ(enc.token_ids.size(), 64u);
  EXPECT_EQ(enc.token_ids[0], vocab.cls_id());
  EXPECT_EQ(enc.token_ids[63], vocab.sep_id());
  int mask_sum = 0;
  for (int m : enc.attention_mask) mask_sum += m;
  EXPECT_EQ(mask_sum, 64);
}

TEST(EncodeSentence, EmptySentence) {
  auto vocab = tiny_vocab();
  auto enc = encode_sentence("", vocab, 64);
  EXPECT_EQ(enc.n_real, 2);
  EXPECT_EQ(enc.token_ids[0], vocab.cls_id());
  EXPECT_EQ(enc.token_ids[1], vocab.sep_id());
  int mask_sum = 0;
  for (int m : enc.attention_mask) mask_sum += m;
  EXPECT_EQ(mask_sum, 2);
  for (std::size_t i = 2; i < 64; ++i)
    EXPECT_EQ(enc.token_ids[i], vocab.pad_id());
}

TEST(EncodeSentence, TenTokenSentence) {
  auto vocab = tiny_vocab();
  auto enc =
      encode_sentence("one two three four five six seven eight nine ten",
                      vocab, 64);
  EXPECT_EQ(enc.n_real, 12);
  int mask_sum = 0;
  for (int m : enc.attention_mask) mask_sum += m;
  EXPECT_EQ(mask_sum, 12);
}

TEST(EncodeSentence, MaskMatchesPadPositions) {
  auto vocab = tiny_vocab();
  auto enc = encode_sentence("one two [UNK]", vocab, 16);
  for (std::size_t i = 0; i < enc.token_ids.size(); ++i) {
    EXPECT_EQ(enc.attention_mask[i] == 0, enc.token_ids[i] == vocab.pad_id());
  }
}

namespace {
RawFiling filing_with_sentences(int n) {
  RawFiling f;
  f.doc_id = "doc";
  f.company_id = "co";
  f.filing_date = parse_date("2003-05-01");
  f.year = 2003;
  for (int i = 0; i < n; ++i) f.text += "one two three. ";
  return f;
}
}  // namespace

TEST(EncodeDocument, TruncatesTo50Sentences) {
  auto vocab = tiny_vocab();
  auto doc = encode_document(filing_with_sentences(60), vocab, 16, 50);
  EXPECT_EQ(doc.n_sentences, 50);
  EXPECT_EQ(doc.sentences.size(), 50u);
  for (int m : doc.sentence_mask) EXPECT_EQ(m, 1);
}

TEST(EncodeDocument, PadsShortDocument) {
  auto vocab = tiny_vocab();
  auto doc = encode_document(filing_with_sentences(3), vocab, 16, 50);
  EXPECT_EQ(doc.n_sentences, 3);
  for (std::size_t s = 0; s < 50; ++s)
    EXPECT_EQ(doc.sentence_mask[s], s < 3 ? 1 : 0);
  // padding sentences still carry the [CLS]/[SEP] pair
  EXPECT_EQ(doc.sentences[10].token_ids[0], vocab.cls_id());
  EXPECT_EQ(doc.sentences[10].token_ids[1], vocab.sep_id());
  EXPECT_EQ(doc.sentences[10].n_real, 2);
}

TEST(EncodeDocument, EmptyFiling) {
  auto vocab = tiny_vocab();
  auto doc = encode_document(filing_with_sentences(0), vocab, 16, 50);
  EXPECT_EQ(doc.n_sentences, 0);
  for (int m : doc.sentence_mask) EXPECT_EQ(m, 0);
}

TEST(EncodeDocument, ShapeIsAlwaysLByT) {
  auto vocab = tiny_vocab();
  for (int n : {0, 1, 7, 80}) {
    auto doc = encode_document(filing_with_sentences(n), vocab, 16, 8);
    EXPECT_EQ(doc.sentences.size(), 8u);
    for (const auto& s : doc.sentences) {
      EXPECT_EQ(s.token_ids.size(), 16u);
      EXPECT_EQ(s.attention_mask.size(), 16u);
    }
  }
}

TEST(VocabularyFile, SaveLoadRoundTrip) {
  auto vocab = build_vocabulary({"alpha beta gamma alpha"}, 10);
  std::string path = std::filesystem::temp_directory_path() /
                     "xrisk_vocab_test.txt";
  vocab.save(path);
  auto loaded = Vocabulary::load(path);
  EXPECT_EQ(loaded.tokens(), vocab.tokens());
  std::remove(path.c_str());
}

TEST(CorpusFile, JsonlRoundTripAndValidation) {
  namespace fs = std::filesystem;
  std::string path = fs::temp_directory_path() / "xrisk_corpus_test.jsonl";
  std::vector<RawFiling> corpus = {filing_with_sentences(2)};
  corpus[0].doc_id = "d1";
  save_corpus(corpus, path);
  auto loaded = load_corpus(path);
  ASSERT_EQ(loaded.size(), 1u);
  EXPECT_EQ(loaded[0].doc_id, "d1");
  EXPECT_EQ(loaded[0].year, 2003);

  // year mismatch is rejected
  std::ofstream f(path);
  f << R"({"doc_id":"d2","company_id":"c","filing_date":"2004-01-02","year":2003,"text":""})"
    << "\n";
  f.close();
  EXPECT_THROW(load_corpus(path), InputError);
  std::remove(path.c_str());
}

TEST(CorpusFile, DuplicateDocIdRejected) {
  namespace fs = std::filesystem;
  std::string path = fs::temp_directory_path() / "xrisk_corpus_dup.jsonl";
  std::ofstream f(path);
  f << R"({"doc_id":"d","company_id":"c","filing_date":"2003-01-02","year":2003,"text":""})"
    << "\n"
    << R"({"doc_id":"d","company_id":"c","filing_date":"2003-01-03","year":2003,"text":""})"
    << "\n";
  f.close();
  EXPECT_THROW(load_corpus(path), InputError);
  std::remove(path.c_str());
}
