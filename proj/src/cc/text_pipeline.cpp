#include "triage/cc/text_pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <unordered_set>

#include "triage/error.hpp"

namespace triage::cc {

namespace {

bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '#' || c == '-' ||
         c == '\'';
}

bool has_content(const std::string& t) {
  return std::any_of(t.begin(), t.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '#';
  });
}

// "don't" -> "do" "n't"; "it's" -> "it" "'s"; other apostrophes stay inside.
void split_contraction(const std::string& word, std::vector<std::string>& out) {
  static const char* kSuffixes[] = {"'s", "'re", "'ve", "'ll", "'d", "'m"};
  if (word.size() > 3 && word.compare(word.size() - 3, 3, "n't") == 0) {
    out.push_back(word.substr(0, word.size() - 3));
    out.push_back("n't");
    return;
  }
  for (const char* s : kSuffixes) {
    const std::string suf(s);
    if (word.size() > suf.size() &&
        word.compare(word.size() - suf.size(), suf.size(), suf) == 0) {
      out.push_back(word.substr(0, word.size() - suf.size()));
      out.push_back(suf);
      return;
    }
  }
  out.push_back(word);
}

std::string strip_quotes(const std::string& w) {
  std::size_t b = 0, e = w.size();
  while (b < e && (w[b] == '\'' || w[b] == '-')) ++b;
  while (e > b && (w[e - 1] == '-')) --e;
  // A trailing lone quote is a closing quote, not a contraction.
  if (e > b + 1 && w[e - 1] == '\'' ) --e;
  return w.substr(b, e - b);
}

}  // namespace

util::Json TextPipelineConfig::to_json() const {
  return {{"max_features", max_features},
          {"max_df", max_df},
          {"ngram_max", ngram_max},
          {"crop50", crop50}};
}

TextPipelineConfig TextPipelineConfig::from_json(const util::Json& j) {
  TextPipelineConfig c;
  c.max_features = j.value("max_features", c.max_features);
  c.max_df = j.value("max_df", c.max_df);
  c.ngram_max = j.value("ngram_max", c.ngram_max);
  c.crop50 = j.value("crop50", c.crop50);
  if (c.ngram_max < 1 || c.ngram_max > 2) throw ConfigError("ngram_max must be 1 or 2");
  if (!(c.max_df > 0.0 && c.max_df <= 1.0)) throw ConfigError("max_df must be in (0, 1]");
  return c;
}

const std::vector<std::string>& english_stopwords() {
  static const std::vector<std::string> kWords = {
      "i", "me", "my", "myself", "we", "our", "ours", "ourselves", "you", "you're",
      "you've", "you'll", "you'd", "your", "yours", "yourself", "yourselves", "he",
      "him", "his", "himself", "she", "she's", "her", "hers", "herself", "it", "it's",
      "its", "itself", "they", "them", "their", "theirs", "themselves", "what",
      "which", "who", "whom", "this", "that", "that'll", "these", "those", "am", "is",
      "are", "was", "were", "be", "been", "being", "have", "has", "had", "having",
      "do", "does", "did", "doing", "a", "an", "the", "and", "but", "if", "or",
      "because", "as", "until", "while", "of", "at", "by", "for", "with", "about",
      "against", "between", "into", "through", "during", "before", "after", "above",
      "below", "to", "from", "up", "down", "in", "out", "on", "off", "over", "under",
      "again", "further", "then", "once", "here", "there", "when", "where", "why",
      "how", "all", "any", "both", "each", "few", "more", "most", "other", "some",
      "such", "no", "nor", "not", "only", "own", "same", "so", "than", "too", "very",
      "s", "t", "can", "will", "just", "don", "don't", "should", "should've", "now",
      "d", "ll", "m", "o", "re", "ve", "y", "ain", "aren", "aren't", "couldn",
      "couldn't", "didn", "didn't", "doesn", "doesn't", "hadn", "hadn't", "hasn",
      "hasn't", "haven", "haven't", "isn", "isn't", "ma", "mightn", "mightn't",
      "mustn", "mustn't", "needn", "needn't", "shan", "shan't", "shouldn",
      "shouldn't", "wasn", "wasn't", "weren", "weren't", "won", "won't", "wouldn",
      "wouldn't"};
  return kWords;
}

std::vector<std::string> tokenize(const std::string& text) {
  std::string s;
  s.reserve(text.size());
  for (std::size_t i = 0; i < text.size();) {
    const char c = text[i];
    if (std::isdigit(static_cast<unsigned char>(c))) {
      // A number is a digit run with optional inner '.' or ',' groups.
      std::size_t j = i;
      while (j < text.size()) {
        if (std::isdigit(static_cast<unsigned char>(text[j]))) {
          ++j;
        } else if ((text[j] == '.' || text[j] == ',') && j + 1 < text.size() &&
                   std::isdigit(static_cast<unsigned char>(text[j + 1]))) {
          ++j;
        } else {
          break;
        }
      }
      s.push_back('#');
      i = j;
    } else {
      s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
      ++i;
    }
  }
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const char c = s[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
    } else if (is_word_char(c)) {
      std::size_t j = i;
      while (j < s.size() && is_word_char(s[j])) ++j;
      const std::string word = strip_quotes(s.substr(i, j - i));
      if (!word.empty()) split_contraction(word, out);
      i = j;
    } else {
      out.emplace_back(1, c);  // other punctuation stands alone
      ++i;
    }
  }
  out.erase(std::remove_if(out.begin(), out.end(),
                           [](const std::string& t) { return !has_content(t); }),
            out.end());
  return out;
}

std::vector<std::string> TextPipeline::terms(const std::string& raw) const {
  static const std::unordered_set<std::string> kStop(english_stopwords().begin(),
                                                     english_stopwords().end());
  const std::string text = config_.crop50 ? raw.substr(0, 50) : raw;
  std::vector<std::string> toks;
  for (auto& t : tokenize(text)) {
    if (!kStop.count(t)) toks.push_back(std::move(t));
  }
  std::vector<std::string> out = toks;
  if (config_.ngram_max >= 2) {
    for (std::size_t k = 1; k < toks.size(); ++k) out.push_back(toks[k - 1] + " " + toks[k]);
  }
  return out;
}

TextPipeline TextPipeline::fit(std::span<const std::string> corpus,
                               const TextPipelineConfig& config) {
  if (corpus.empty()) throw ValidationError("text pipeline: empty corpus");
  TextPipeline p;
  p.config_ = config;
  p.n_docs_ = static_cast<std::int64_t>(corpus.size());
  std::map<std::string, std::pair<std::int64_t, std::int64_t>> stats;  // freq, df
  for (const std::string& doc : corpus) {
    const auto terms = p.terms(doc);
    std::unordered_set<std::string> seen;
    for (const auto& t : terms) {
      auto& s = stats[t];
      ++s.first;
      if (seen.insert(t).second) ++s.second;
    }
  }
  struct Cand {
    std::string term;
    std::int64_t freq, df;
  };
  std::vector<Cand> cands;
  const double n = static_cast<double>(p.n_docs_);
  for (const auto& [term, s] : stats) {
    if (static_cast<double>(s.second) / n <= config.max_df) {
      cands.push_back({term, s.first, s.second});
    }
  }
  std::stable_sort(cands.begin(), cands.end(),
                   [](const Cand& a, const Cand& b) { return a.freq > b.freq; });
  if (cands.size() > config.max_features) cands.resize(config.max_features);
  for (const Cand& c : cands) {
    p.vocab_.push_back(c.term);
    p.idf_.push_back(std::log(n / static_cast<double>(c.df)) + 1.0);
  }
  p.reindex();
  return p;
}

void TextPipeline::reindex() {
  index_.clear();
  for (std::size_t i = 0; i < vocab_.size(); ++i) index_.emplace(vocab_[i], static_cast<int>(i));
}

int TextPipeline::index_of(const std::string& term) const {
  auto it = index_.find(term);
  return it == index_.end() ? -1 : it->second;
}

SparseVector TextPipeline::embed(const std::string& text) const {
  std::map<int, double> tf;
  for (const auto& t : terms(text)) {
    const int k = index_of(t);
    if (k >= 0) tf[k] += 1.0;
  }
  SparseVector v;
  double norm = 0.0;
  for (const auto& [k, count] : tf) {
    const double w = count * idf_[static_cast<std::size_t>(k)];
    v.index.push_back(k);
    v.value.push_back(w);
    norm += w * w;
  }
  norm = std::sqrt(norm);
  for (double& w : v.value) w /= norm;
  return v;
}

util::Json TextPipeline::to_json() const {
  return {{"config", config_.to_json()},
          {"n_documents", n_docs_},
          {"vocabulary", vocab_},
          {"idf", idf_}};
}

TextPipeline TextPipeline::from_json(const util::Json& j) {
  TextPipeline p;
  p.config_ = TextPipelineConfig::from_json(util::get_field<util::Json>(j, "config", "text pipeline"));
  p.n_docs_ = util::get_field<std::int64_t>(j, "n_documents", "text pipeline");
  p.vocab_ = util::get_field<std::vector<std::string>>(j, "vocabulary", "text pipeline");
  p.idf_ = util::get_field<std::vector<double>>(j, "idf", "text pipeline");
  if (p.vocab_.size() != p.idf_.size()) {
    throw IntegrityError("text pipeline: vocabulary and idf lengths differ");
  }
  p.reindex();
  return p;
}

ExternalEmbeddings ExternalEmbeddings::load(const std::filesystem::path& path) {
  ExternalEmbeddings e;
  util::for_each_jsonl(path, [&](const util::Json& row) {
    auto id = util::get_field<std::string>(row, "text_id", path.string());
    auto vec = util::get_field<std::vector<double>>(row, "vector", path.string());
    if (e.vectors.empty()) e.dim = static_cast<int>(vec.size());
    if (static_cast<int>(vec.size()) != e.dim) {
      throw ShapeError(path.string() + ": vector for " + id + " has length " +
                       std::to_string(vec.size()) + ", expected " + std::to_string(e.dim));
    }
    e.vectors[std::move(id)] = std::move(vec);
  });
  return e;
}

const std::vector<double>& ExternalEmbeddings::at(const std::string& text_id) const {
  auto it = vectors.find(text_id);
  if (it == vectors.end()) throw NotFoundError("no external embedding for text " + text_id);
  return it->second;
}

}  // namespace triage::cc
