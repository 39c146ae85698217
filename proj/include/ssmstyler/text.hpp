#pragma once

#include <cctype>
#include <fstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "error.hpp"
#include "linalg.hpp"
#include "params.hpp"

namespace ssmstyler {

inline constexpr const char* kUnkToken = "<unk>";

/// Ordered word list; index 0 is the reserved unknown-word token.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> entries) : entries_(std::move(entries)) {
    if (entries_.empty() || entries_[0] != kUnkToken)
      throw InvalidArgument("vocabulary must start with the <unk> token");
    for (std::size_t i = 0; i < entries_.size(); ++i)
      if (!index_.emplace(entries_[i], i).second)
        throw InvalidArgument("duplicate vocabulary entry '" + entries_[i] + "'");
  }

  // One word per line, line number = index.
  static Vocabulary from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open vocabulary '" + path + "'");
    std::vector<std::string> words;
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      words.push_back(line);
    }
    return Vocabulary(std::move(words));
  }

  static const Vocabulary& builtin();

  std::size_t size() const { return entries_.size(); }
  std::size_t unk_index() const { return 0; }
  const std::string& word(std::size_t i) const { return entries_.at(i); }
  const std::vector<std::string>& entries() const { return entries_; }

  std::size_t lookup(std::string_view w) const {
    auto it = index_.find(std::string(w));
    return it == index_.end() ? unk_index() : it->second;
  }
  bool contains(std::string_view w) const { return index_.count(std::string(w)) != 0; }

 private:
  std::vector<std::string> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Style vocabulary; data/vocab.txt carries the same list.
inline const std::vector<std::string>& builtin_vocab_words() {
  static const std::vector<std::string> words = {
      "<unk>",     "excited",  "mysterious", "soothing",   "angry",     "comedic",
      "tense",     "dramatic", "whispering", "gentle",     "warm",      "authoritative",
      "calm",      "cheerful", "sad",        "happy",      "dark",      "bright",
      "soft",      "loud",     "fast",       "slow",       "deep",      "high",
      "low",       "tone",     "voice",      "pitch",      "speaking",  "speech",
      "style",     "and",      "with",       "a",          "an",        "the",
      "very",      "slightly", "quite",      "in",         "of",        "mood",
      "energetic", "relaxed",  "eerie",      "furious",    "tender",    "playful",
      "serious",   "whisper",  "shout",      "raspy",      "smooth",    "breathy",
      "crisp",     "vintage",  "radio",      "nervous",    "confident", "solemn",
      "urgent",    "dreamy",   "harsh",      "intimate"};
  return words;
}

inline const Vocabulary& Vocabulary::builtin() {
  static const Vocabulary v(builtin_vocab_words());
  return v;
}

struct TokenSequence {
  std::vector<std::size_t> ids;
};

/// Lower-case, split on whitespace and punctuation, map words (unknown -> <unk>).
inline TokenSequence tokenize(std::string_view prompt, const Vocabulary& vocab) {
  TokenSequence out;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) out.ids.push_back(vocab.lookup(word));
    word.clear();
  };
  for (char ch : prompt) {
    const auto uc = static_cast<unsigned char>(ch);
    if (std::isalnum(uc) || uc >= 0x80) {
      word.push_back(static_cast<char>(std::tolower(uc)));
    } else {
      flush();
    }
  }
  flush();
  if (out.ids.empty()) throw InvalidArgument("prompt contains no words");
  return out;
}

/// e_T: per-token rows and their mean.
struct TextEmbedding {
  Matrix tokens;  // L_text x d_text
  std::vector<double> pooled;

  std::size_t length() const { return tokens.rows; }
  std::size_t dim() const { return tokens.cols; }
};

inline TextEmbedding embed_text(const TokenSequence& tokens, const ParamStore& params) {
  if (tokens.ids.empty()) throw InvalidArgument("empty token sequence");
  const Param& table = params.at("text.embedding");
  if (table.shape.size() != 2) throw InvalidConfig("text.embedding must be 2-D");
  const std::size_t rows = table.shape[0], d = table.shape[1];
  TextEmbedding e{Matrix(tokens.ids.size(), d), std::vector<double>(d, 0.0)};
  for (std::size_t i = 0; i < tokens.ids.size(); ++i) {
    const std::size_t id = tokens.ids[i];
    if (id >= rows)
      throw CorruptCheckpoint("token id " + std::to_string(id) + " outside embedding table of " +
                              std::to_string(rows) + " rows");
    for (std::size_t j = 0; j < d; ++j) {
      e.tokens(i, j) = table.value[id * d + j];
      e.pooled[j] += table.value[id * d + j];
    }
  }
  for (double& v : e.pooled) v /= static_cast<double>(tokens.ids.size());
  return e;
}

/// Scatter gradients on token rows and on the pooled vector back into the table.
inline void embed_text_backward(const TokenSequence& tokens, const Matrix& grad_tokens,
                                std::span<const double> grad_pooled, ParamStore& params) {
  Param& table = params.at("text.embedding");
  const std::size_t d = table.shape[1];
  const double inv = 1.0 / static_cast<double>(tokens.ids.size());
  for (std::size_t i = 0; i < tokens.ids.size(); ++i) {
    double* g = table.grad.data() + tokens.ids[i] * d;
    for (std::size_t j = 0; j < d; ++j) {
      if (grad_tokens.rows) g[j] += grad_tokens(i, j);
      g[j] += grad_pooled[j] * inv;
    }
  }
}

/// Unit vector v / |v|; throws on an exactly-zero vector.
inline std::vector<double> l2_normalize(std::span<const double> v) {
  const double n = linalg::norm(v);
  if (n == 0.0) throw DegenerateEmbedding("cannot normalise a zero vector");
  std::vector<double> out(v.begin(), v.end());
  for (double& x : out) x /= n;
  return out;
}

// Gradient of u = v/|v| pulled back to v.
inline std::vector<double> l2_normalize_backward(std::span<const double> v,
                                                 std::span<const double> grad_u) {
  const double n = linalg::norm(v);
  std::vector<double> g(v.size());
  double ug = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) ug += v[i] / n * grad_u[i];
  for (std::size_t i = 0; i < v.size(); ++i) g[i] = (grad_u[i] - v[i] / n * ug) / n;
  return g;
}

/// Pre-normalisation projection W pooled + b of the text style head.
inline std::vector<double> style_text_preactivation(const TextEmbedding& e,
                                                    const ParamStore& params) {
  const Param& w = params.at("phi_text.weight");
  if (w.shape.size() != 2 || w.shape[1] != e.dim())
    throw InvalidConfig("phi_text.weight does not match d_text");
  const Param& b = params.expect("phi_text.bias", {w.shape[0]});
  std::vector<double> v(w.shape[0]);
  linalg::affine(w.value, w.shape[0], w.shape[1], e.pooled, b.value, v);
  return v;
}

/// phi_text: affine map of the pooled embedding, L2-normalised.
inline std::vector<double> project_style_text(const TextEmbedding& e, const ParamStore& params) {
  if (linalg::norm(e.pooled) == 0.0)
    throw DegenerateEmbedding("pooled text embedding is exactly zero");
  return l2_normalize(style_text_preactivation(e, params));
}

}  // namespace ssmstyler
