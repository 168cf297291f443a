#pragma once

#include <array>
#include <string>
#include <vector>

#include "spanner/span.hpp"

namespace spanner {

// Predictions are typed spans per sentence, aligned with dataset order.
using PredictionSpans = std::vector<std::vector<Span>>;

struct TypeStats {
  std::string type;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t tp = 0;
  std::size_t pred = 0;
  std::size_t gold = 0;
};

struct EvalResult {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t tp = 0;
  std::size_t pred_total = 0;
  std::size_t gold_total = 0;
  std::vector<TypeStats> per_type;
};

// Exact-match micro P/R/F1: a prediction is a true positive iff its
// (span, type) equals a gold entity.
EvalResult evaluate(const PredictionSpans& predictions, const Dataset& dataset);

enum class ErrorClass {
  TypeError = 0,             // region correct, type wrong
  BoundaryTypeCorrect = 1,   // one boundary wrong, type right
  BoundaryTypeWrong = 2,     // one boundary wrong, type wrong
  OverTrigger = 3,           // prediction overlaps no gold entity
  UnderTrigger = 4,          // gold entity overlapped by no prediction
  DoubleBoundaryOverlap = 5, // both boundaries wrong but region overlaps gold
};
constexpr std::size_t kErrorClassCount = 6;
const char* error_class_name(ErrorClass c);

struct ErrorReport {
  std::array<std::size_t, kErrorClassCount> counts{};
  std::size_t total_errors = 0;

  std::size_t count(ErrorClass c) const { return counts[static_cast<std::size_t>(c)]; }
};

// Assigns every false-positive prediction to exactly one prediction-side
// class and every untouched gold span to UnderTrigger. Precedence:
// exact-region > single-boundary > overlap > none; each gold span is
// consumed by at most one prediction in the first two steps.
ErrorReport classify_errors(const PredictionSpans& predictions, const Dataset& dataset);

// metrics CSV: header scope,type,precision,recall,f1,tp,pred,gold
// error CSV:   header class,count,fraction
// The pie chart SVG is written when there is at least one error.
void emit_report(const EvalResult& eval, const ErrorReport& errors,
                 const std::string& metrics_csv_path, const std::string& errors_csv_path,
                 const std::string& pie_svg_path = "");

void write_metrics_csv(const EvalResult& eval, const std::string& path);
void write_errors_csv(const ErrorReport& errors, const std::string& path);
EvalResult read_metrics_csv(const std::string& path);
ErrorReport read_errors_csv(const std::string& path);

// Shortest-exact formatting used for all CSV numbers (round-trips doubles).
std::string format_double(double v);

}  // namespace spanner
