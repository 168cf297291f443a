#include "spanner/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace spanner {

namespace {

std::ostream& warn_stream(const LoadOptions& opts) {
  return opts.warnings ? *opts.warnings : std::cerr;
}

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream iss(line);
  std::string tok;
  while (iss >> tok) out.push_back(tok);
  return out;
}

// Tokenizes words, records the word/subtoken alignment and dedupes gold
// spans by (start, end, type). Returns false when the sentence exceeds the
// subtoken budget.
bool build_sentence(std::vector<std::string> words, std::vector<Span> gold,
                    const LoadOptions& opts, Sentence& out) {
  Sentence s;
  s.words = std::move(words);
  for (const auto& w : s.words) {
    std::vector<std::string> pieces = opts.tokenizer(w);
    if (pieces.empty()) pieces.push_back(w);
    s.word_starts.push_back(s.n_subtokens());
    for (std::size_t i = 0; i < pieces.size(); ++i) {
      s.first_subtoken_mask.push_back(i == 0);
      s.subtokens.push_back(std::move(pieces[i]));
    }
  }
  if (s.n_subtokens() > opts.max_sentence_subtokens) return false;
  std::set<Span> dedup(gold.begin(), gold.end());
  s.gold.assign(dedup.begin(), dedup.end());
  out = std::move(s);
  return true;
}

void register_types(const Sentence& s, std::vector<std::string>& inventory) {
  for (const auto& span : s.gold) {
    if (std::find(inventory.begin(), inventory.end(), span.type) == inventory.end())
      inventory.push_back(span.type);
  }
}

struct IobRun {
  bool open = false;
  int start = 0;
  std::string type;
};

}  // namespace

Tokenizer identity_tokenizer() {
  return [](const std::string& word) { return std::vector<std::string>{word}; };
}

int Dataset::type_index(const std::string& type) const {
  auto it = std::find(type_inventory.begin(), type_inventory.end(), type);
  return it == type_inventory.end() ? -1
                                    : static_cast<int>(it - type_inventory.begin());
}

std::size_t Dataset::total_gold() const {
  std::size_t n = 0;
  for (const auto& s : sentences) n += s.gold.size();
  return n;
}

int Span::intersection(const Span& o) const {
  const int lo = std::max(start, o.start);
  const int hi = std::min(end, o.end);
  return std::max(0, hi - lo);
}

double Span::iou(const Span& o) const {
  const int inter = intersection(o);
  const int uni = length() + o.length() - inter;
  return uni == 0 ? 0.0 : static_cast<double>(inter) / uni;
}

Dataset load_conll(const std::string& path, const LoadOptions& opts) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open CoNLL file: " + path);
  return load_conll_stream(in, opts);
}

Dataset load_conll_stream(std::istream& in, const LoadOptions& opts) {
  Dataset ds;
  std::vector<std::string> words;
  std::vector<Span> gold;
  std::vector<std::size_t> token_lines;
  IobRun run;
  std::size_t line_no = 0;
  std::size_t dropped = 0;

  auto close_run = [&](int end_word) {
    if (run.open) {
      gold.push_back(Span{run.start, end_word, run.type});
      run.open = false;
    }
  };
  auto flush_sentence = [&]() {
    close_run(static_cast<int>(words.size()));
    if (words.empty()) return;
    Sentence s;
    if (build_sentence(std::move(words), std::move(gold), opts, s)) {
      register_types(s, ds.type_inventory);
      ds.sentences.push_back(std::move(s));
    } else {
      ++dropped;
    }
    words.clear();
    gold.clear();
    token_lines.clear();
  };

  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto cols = split_ws(line);
    if (cols.empty()) {
      flush_sentence();
      continue;
    }
    if (cols[0] == "-DOCSTART-") {
      flush_sentence();
      continue;
    }
    const std::string& tag = cols.back();
    const int idx = static_cast<int>(words.size());
    if (tag == "O") {
      close_run(idx);
    } else if (tag.size() > 2 && tag[1] == '-' && (tag[0] == 'B' || tag[0] == 'I')) {
      const std::string type = tag.substr(2);
      if (tag[0] == 'B') {
        close_run(idx);
        run = IobRun{true, idx, type};
      } else {  // I-
        if (run.open && run.type == type) {
          // continuation
        } else if (opts.scheme == IobScheme::Iob2Strict) {
          throw ParseError("I-" + type + " without preceding same-type B-/I- tag", line_no);
        } else {
          close_run(idx);
          run = IobRun{true, idx, type};
        }
      }
    } else {
      throw ParseError("unrecognized NER tag '" + tag + "'", line_no);
    }
    words.push_back(cols[0]);
    token_lines.push_back(line_no);
  }
  flush_sentence();
  if (dropped > 0)
    warn_stream(opts) << "load_conll: dropped " << dropped
                      << " sentence(s) over the subtoken limit\n";
  return ds;
}

Dataset load_json_spans(const std::string& path, const LoadOptions& opts) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open JSONL file: " + path);
  return load_json_spans_stream(in, opts);
}

Dataset load_json_spans_stream(std::istream& in, const LoadOptions& opts) {
  Dataset ds;
  std::string line;
  std::size_t line_no = 0;
  std::size_t rejected = 0;
  std::size_t dropped = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(std::string("invalid JSON record: ") + e.what(), line_no);
    }
    if (!rec.contains("tokens") || !rec["tokens"].is_array())
      throw ParseError("record missing 'tokens' array", line_no);
    std::vector<std::string> words = rec["tokens"].get<std::vector<std::string>>();
    const int n = static_cast<int>(words.size());

    std::vector<Span> gold;
    bool reject = false;
    if (rec.contains("entities")) {
      for (const auto& ent : rec["entities"]) {
        Span sp{ent.at("start").get<int>(), ent.at("end").get<int>(),
                ent.at("type").get<std::string>()};
        if (sp.start < 0 || sp.start >= sp.end || sp.end > n) {
          warn_stream(opts) << "load_json_spans: line " << line_no << ": span ["
                            << sp.start << "," << sp.end << ") out of range for " << n
                            << " tokens; record rejected\n";
          reject = true;
          break;
        }
        bool dup = false;
        for (const auto& g : gold) {
          if (g == sp) {
            warn_stream(opts) << "load_json_spans: line " << line_no
                              << ": duplicate entity deduplicated\n";
            dup = true;
            break;
          }
          if (g.same_region(sp) && g.type != sp.type) {
            // A single-type label per region is assumed downstream; records
            // carrying two types for one region are rejected and counted.
            warn_stream(opts) << "load_json_spans: line " << line_no << ": region ["
                              << sp.start << "," << sp.end
                              << ") has two types; record rejected\n";
            reject = true;
            break;
          }
        }
        if (reject) break;
        if (!dup) gold.push_back(std::move(sp));
      }
    }
    if (reject) {
      ++rejected;
      continue;
    }
    Sentence s;
    if (!build_sentence(std::move(words), std::move(gold), opts, s)) {
      ++dropped;
      continue;
    }
    register_types(s, ds.type_inventory);
    ds.sentences.push_back(std::move(s));
  }
  if (rejected > 0)
    warn_stream(opts) << "load_json_spans: rejected " << rejected << " record(s)\n";
  if (dropped > 0)
    warn_stream(opts) << "load_json_spans: dropped " << dropped
                      << " sentence(s) over the subtoken limit\n";
  return ds;
}

void write_json_spans(const Dataset& dataset, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write JSONL file: " + path);
  for (const auto& s : dataset.sentences) {
    nlohmann::json rec;
    rec["tokens"] = s.words;
    rec["entities"] = nlohmann::json::array();
    for (const auto& g : s.gold)
      rec["entities"].push_back({{"start", g.start}, {"end", g.end}, {"type", g.type}});
    out << rec.dump() << "\n";
  }
}

std::vector<std::string> spans_to_iob2(const Sentence& sentence) {
  std::vector<Span> spans = sentence.gold;
  std::sort(spans.begin(), spans.end());
  for (std::size_t i = 1; i < spans.size(); ++i) {
    if (spans[i].start < spans[i - 1].end)
      throw std::invalid_argument("spans_to_iob2 requires a flat gold set");
  }
  std::vector<std::string> tags(sentence.words.size(), "O");
  for (const auto& sp : spans) {
    tags[static_cast<std::size_t>(sp.start)] = "B-" + sp.type;
    for (int i = sp.start + 1; i < sp.end; ++i)
      tags[static_cast<std::size_t>(i)] = "I-" + sp.type;
  }
  return tags;
}

BoundaryLabels spans_to_boundary_labels(const Sentence& sentence) {
  BoundaryLabels labels;
  labels.start_labels.assign(static_cast<std::size_t>(sentence.n_words()), false);
  labels.end_labels.assign(static_cast<std::size_t>(sentence.n_words()) + 1, false);
  for (const auto& sp : sentence.gold) {
    labels.start_labels[static_cast<std::size_t>(sp.start)] = true;
    labels.end_labels[static_cast<std::size_t>(sp.end)] = true;
  }
  return labels;
}

double length_coverage(const Dataset& dataset, int limit) {
  if (limit < 1) throw std::invalid_argument("length_coverage: limit must be >= 1");
  std::size_t total = 0;
  std::size_t covered = 0;
  for (const auto& s : dataset.sentences) {
    for (const auto& g : s.gold) {
      ++total;
      if (g.length() <= limit) ++covered;
    }
  }
  return total == 0 ? 1.0 : static_cast<double>(covered) / static_cast<double>(total);
}

}  // namespace spanner
