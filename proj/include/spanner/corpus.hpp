#pragma once

#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "spanner/span.hpp"

namespace spanner {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& msg, std::size_t line)
      : std::runtime_error(msg + " (line " + std::to_string(line) + ")"), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Splits one word into subtokens. The identity tokenizer (default) keeps
// 1 word = 1 subtoken so alignment logic can be tested without a subword
// vocabulary.
using Tokenizer = std::function<std::vector<std::string>(const std::string&)>;
Tokenizer identity_tokenizer();

enum class IobScheme {
  Iob1,        // bare I-X opens an entity (CoNLL2003 ships this)
  Iob2Strict,  // I-X without a same-type B-/I- predecessor is an error
};

struct LoadOptions {
  Tokenizer tokenizer = identity_tokenizer();
  IobScheme scheme = IobScheme::Iob1;
  int max_sentence_subtokens = 128;  // overlong sentences dropped with a warning
  std::ostream* warnings = nullptr;  // defaults to std::cerr
};

// 4-column CoNLL format (token, POS, chunk, NER tag), blank-line separated,
// -DOCSTART- lines skipped. IOB runs become typed spans with exclusive ends.
Dataset load_conll(const std::string& path, const LoadOptions& opts = {});
Dataset load_conll_stream(std::istream& in, const LoadOptions& opts = {});

// JSON lines: {"tokens": [...], "entities": [{"start": s, "end": e, "type": t}]},
// end exclusive. Overlapping spans are preserved verbatim. Records with
// out-of-range spans or same-region/different-type gold pairs are rejected;
// duplicate (start,end,type) entries deduplicate with a warning.
Dataset load_json_spans(const std::string& path, const LoadOptions& opts = {});
Dataset load_json_spans_stream(std::istream& in, const LoadOptions& opts = {});

void write_json_spans(const Dataset& dataset, const std::string& path);

// IOB2 tags for a flat (non-overlapping) gold set; throws if spans overlap.
std::vector<std::string> spans_to_iob2(const Sentence& sentence);

// start_labels has n_words slots; end_labels has n_words+1 (the sentinel slot
// catches entities ending at the sentence boundary).
struct BoundaryLabels {
  std::vector<bool> start_labels;
  std::vector<bool> end_labels;
};
BoundaryLabels spans_to_boundary_labels(const Sentence& sentence);

// Fraction of gold spans with length <= limit; 1.0 when there are none.
double length_coverage(const Dataset& dataset, int limit);

}  // namespace spanner
