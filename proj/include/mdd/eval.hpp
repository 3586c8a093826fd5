// include/mdd/eval.hpp

// Copyright 2026  The textmdd Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef MDD_EVAL_HPP_
#define MDD_EVAL_HPP_

#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace mdd {
class PhoneSet;
}

namespace mdd::eval {

using Sequence = std::vector<std::string>;

enum class EditOp { kMatch, kSubstitute, kDelete, kInsert };

/// One column of an alignment. A gap is the empty string: `ref` is empty for
/// insertions and `hyp` is empty for deletions.
struct AlignedPair {
  EditOp op;
  std::string ref;
  std::string hyp;
  bool operator==(const AlignedPair &) const = default;
};

struct Alignment {
  std::vector<AlignedPair> ops;

  int substitutions() const;
  int deletions() const;
  int insertions() const;
  /// Levenshtein distance (unit costs).
  int cost() const { return substitutions() + deletions() + insertions(); }
  /// Ref-side symbols in order (gaps skipped); reproduces the reference.
  Sequence ref_side() const;
  Sequence hyp_side() const;
  /// (ref, hyp) pairs of the match and substitute columns.
  std::vector<std::pair<std::string, std::string>> paired() const;
};

/// Minimal unit-cost alignment. Among equal-cost alignments the traceback
/// prefers match, then substitute, then delete, then insert.
Alignment edit_align(std::span<const std::string> ref, std::span<const std::string> hyp);

/// (S + I + D) / |ref|. Throws UsageError on an empty reference.
double per(std::span<const std::string> ref, std::span<const std::string> hyp);

/// Corpus-level PER accumulates edits and reference lengths separately.
struct ErrorTally {
  long edits = 0;
  long substitutions = 0;
  long deletions = 0;
  long insertions = 0;
  long ref_length = 0;

  void add(const Alignment &a);
  double rate() const { return ref_length > 0 ? static_cast<double>(edits) / ref_length : 0.0; }
  ErrorTally &operator+=(const ErrorTally &o);
};

// --- mispronunciation typing -----------------------------------------------

enum class ErrorType { kCorrect, kSubstitution, kInsertion, kDeletion };

struct PositionLabel {
  ErrorType type;
  std::string canonical;  // empty for insertions
  std::string annotated;  // empty for deletions
  bool operator==(const PositionLabel &) const = default;
};

/// Labels derived from edit_align(canonical, annotated).
std::vector<PositionLabel> classify_positions(std::span<const std::string> canonical,
                                              std::span<const std::string> annotated);

// --- hierarchical detection / diagnosis scoring ----------------------------

struct HierarchicalCounts {
  long ta = 0;
  long fr = 0;
  long fa = 0;
  long tr_correct_diag = 0;
  long tr_diag_error = 0;

  long tr() const { return tr_correct_diag + tr_diag_error; }
  HierarchicalCounts &operator+=(const HierarchicalCounts &o);
  bool operator==(const HierarchicalCounts &) const = default;
};

enum class Outcome { kTrueAccept, kFalseRejection, kFalseAccept, kCorrectDiagnosis, kDiagnosisError };

/// One scored slot: a canonical position, or an insertion slot between two
/// canonical positions (canonical empty).
struct ScoredSlot {
  std::string canonical;
  std::string annotated;
  std::string recognized;
  ErrorType annotated_type;  // how the learner deviated from the canonical
  Outcome outcome;
};

/// Scores every slot using the canonical sequence as pivot: canonical is
/// aligned separately to the annotated and to the recognized sequence.
///
/// Per canonical position: annotated == canonical and recognized == canonical
/// is a true accept; annotated == canonical with a different recognition is a
/// false rejection; annotated != canonical but recognized == canonical is a
/// false accept; both differ is a true rejection, correctly diagnosed iff the
/// recognized symbol equals the annotated one (two gaps count as equal).
///
/// Inserted symbols sit in regions between consecutive canonical positions.
/// Within a region the k-th annotated insertion is paired with the k-th
/// recognized insertion and scored with an absent canonical symbol; unpaired
/// annotated insertions are false accepts and unpaired recognized insertions
/// are false rejections.
std::vector<ScoredSlot> score_slots(std::span<const std::string> canonical,
                                    std::span<const std::string> annotated,
                                    std::span<const std::string> recognized);

HierarchicalCounts hierarchical_score(std::span<const std::string> canonical,
                                      std::span<const std::string> annotated,
                                      std::span<const std::string> recognized);

struct MddMetrics {
  double precision = 0;
  double recall = 0;
  double f_measure = 0;
  // Set when the corresponding denominator was zero and 0 was reported.
  bool precision_undefined = false;
  bool recall_undefined = false;
};

/// precision = TR / (TR + FR), recall = TR / (TR + FA), F = 2PR / (P + R).
MddMetrics metrics(const HierarchicalCounts &c);

/// Detection outcome per annotated error type.
struct TypeBreakdown {
  struct Row {
    long total = 0;
    long correct_diag = 0;
    long diag_error = 0;
    long false_accept = 0;
  };
  Row substitution, insertion, deletion;

  void add(std::span<const ScoredSlot> slots);
};

// --- confusion matrices ----------------------------------------------------

struct ConfusionMatrix {
  std::vector<std::string> labels;
  std::vector<long> counts;  // row-major, rows = annotated, columns = recognized

  long at(std::size_t annotated, std::size_t recognized) const {
    return counts[annotated * labels.size() + recognized];
  }
  long total() const;
};

/// Counts (annotated, recognized) pairs whose symbols both lie in `subset`;
/// row and column order follow `subset`. Throws DataError for symbols that are
/// not in the phone set.
ConfusionMatrix confusion_matrix(std::span<const std::pair<std::string, std::string>> pairs,
                                 std::span<const std::string> subset, const PhoneSet &phones);

/// The six vowels and six consonants shown in the published confusion tables.
const std::vector<std::string> &kVowelSubset();
const std::vector<std::string> &kConsonantSubset();

// --- corpus aggregation and reports ----------------------------------------

/// Associative accumulator over utterances.
struct CorpusScore {
  long utterances = 0;
  ErrorTally recognition;  // annotated vs recognized
  HierarchicalCounts counts;
  TypeBreakdown types;
  // (annotated, recognized) match/substitution pair counts.
  std::map<std::pair<std::string, std::string>, long> pairs;

  void add(std::span<const std::string> canonical, std::span<const std::string> annotated,
           std::span<const std::string> recognized);
  CorpusScore &operator+=(const CorpusScore &o);
  std::vector<std::pair<std::string, std::string>> expanded_pairs() const;
};

/// Aligned plain-text report: counts in the accept/reject layout, metrics,
/// error-type breakdown and the two confusion matrices.
std::string format_report(const CorpusScore &score, const PhoneSet &phones);

/// Machine-readable report with stable key order.
nlohmann::ordered_json report_json(const CorpusScore &score, const PhoneSet &phones);

}  // namespace mdd::eval

#endif  // MDD_EVAL_HPP_
