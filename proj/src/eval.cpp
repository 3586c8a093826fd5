// src/eval.cpp

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

#include "mdd/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "mdd/error.hpp"
#include "mdd/phoneset.hpp"

namespace mdd::eval {

int Alignment::substitutions() const {
  return static_cast<int>(std::count_if(ops.begin(), ops.end(),
                                        [](const AlignedPair &p) { return p.op == EditOp::kSubstitute; }));
}
int Alignment::deletions() const {
  return static_cast<int>(std::count_if(ops.begin(), ops.end(),
                                        [](const AlignedPair &p) { return p.op == EditOp::kDelete; }));
}
int Alignment::insertions() const {
  return static_cast<int>(std::count_if(ops.begin(), ops.end(),
                                        [](const AlignedPair &p) { return p.op == EditOp::kInsert; }));
}

Sequence Alignment::ref_side() const {
  Sequence out;
  for (const auto &p : ops)
    if (p.op != EditOp::kInsert) out.push_back(p.ref);
  return out;
}

Sequence Alignment::hyp_side() const {
  Sequence out;
  for (const auto &p : ops)
    if (p.op != EditOp::kDelete) out.push_back(p.hyp);
  return out;
}

std::vector<std::pair<std::string, std::string>> Alignment::paired() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto &p : ops)
    if (p.op == EditOp::kMatch || p.op == EditOp::kSubstitute) out.emplace_back(p.ref, p.hyp);
  return out;
}

Alignment edit_align(std::span<const std::string> ref, std::span<const std::string> hyp) {
  const std::size_t n = ref.size(), m = hyp.size();
  const std::size_t w = m + 1;
  std::vector<int> d((n + 1) * w);
  for (std::size_t i = 0; i <= n; ++i) d[i * w] = static_cast<int>(i);
  for (std::size_t j = 0; j <= m; ++j) d[j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const int diag = d[(i - 1) * w + j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      d[i * w + j] = std::min({diag, d[(i - 1) * w + j] + 1, d[i * w + j - 1] + 1});
    }
  }

  Alignment a;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    const int here = d[i * w + j];
    if (i > 0 && j > 0) {
      const bool same = ref[i - 1] == hyp[j - 1];
      if (same && here == d[(i - 1) * w + j - 1]) {
        a.ops.push_back({EditOp::kMatch, ref[i - 1], hyp[j - 1]});
        --i, --j;
        continue;
      }
      if (!same && here == d[(i - 1) * w + j - 1] + 1) {
        a.ops.push_back({EditOp::kSubstitute, ref[i - 1], hyp[j - 1]});
        --i, --j;
        continue;
      }
    }
    if (i > 0 && here == d[(i - 1) * w + j] + 1) {
      a.ops.push_back({EditOp::kDelete, ref[i - 1], ""});
      --i;
      continue;
    }
    a.ops.push_back({EditOp::kInsert, "", hyp[j - 1]});
    --j;
  }
  std::reverse(a.ops.begin(), a.ops.end());
  return a;
}

double per(std::span<const std::string> ref, std::span<const std::string> hyp) {
  if (ref.empty()) throw UsageError("per: empty reference");
  return static_cast<double>(edit_align(ref, hyp).cost()) / static_cast<double>(ref.size());
}

void ErrorTally::add(const Alignment &a) {
  const int s = a.substitutions(), dl = a.deletions(), in = a.insertions();
  substitutions += s;
  deletions += dl;
  insertions += in;
  edits += s + dl + in;
  ref_length += static_cast<long>(a.ops.size()) - in;
}

ErrorTally &ErrorTally::operator+=(const ErrorTally &o) {
  edits += o.edits;
  substitutions += o.substitutions;
  deletions += o.deletions;
  insertions += o.insertions;
  ref_length += o.ref_length;
  return *this;
}

std::vector<PositionLabel> classify_positions(std::span<const std::string> canonical,
                                              std::span<const std::string> annotated) {
  std::vector<PositionLabel> out;
  for (const auto &p : edit_align(canonical, annotated).ops) {
    ErrorType t = ErrorType::kCorrect;
    switch (p.op) {
      case EditOp::kMatch: t = ErrorType::kCorrect; break;
      case EditOp::kSubstitute: t = ErrorType::kSubstitution; break;
      case EditOp::kInsert: t = ErrorType::kInsertion; break;
      case EditOp::kDelete: t = ErrorType::kDeletion; break;
    }
    out.push_back({t, p.ref, p.hyp});
  }
  return out;
}

HierarchicalCounts &HierarchicalCounts::operator+=(const HierarchicalCounts &o) {
  ta += o.ta;
  fr += o.fr;
  fa += o.fa;
  tr_correct_diag += o.tr_correct_diag;
  tr_diag_error += o.tr_diag_error;
  return *this;
}

namespace {

// The canonical sequence seen through one alignment: the symbol aligned to
// each canonical position, and the insertions collected in each of the
// |canonical| + 1 regions around them.
struct PivotView {
  std::vector<std::string> at;
  std::vector<std::vector<std::string>> inserted;
};

PivotView Pivot(std::span<const std::string> canonical, std::span<const std::string> other) {
  PivotView v;
  v.at.reserve(canonical.size());
  v.inserted.resize(canonical.size() + 1);
  for (const auto &p : edit_align(canonical, other).ops) {
    if (p.op == EditOp::kInsert) {
      v.inserted[v.at.size()].push_back(p.hyp);
    } else {
      v.at.push_back(p.hyp);  // empty for deletions
    }
  }
  return v;
}

Outcome Decide(const std::string &can, const std::string &ann, const std::string &rec) {
  if (ann == can) return rec == can ? Outcome::kTrueAccept : Outcome::kFalseRejection;
  if (rec == can) return Outcome::kFalseAccept;
  return rec == ann ? Outcome::kCorrectDiagnosis : Outcome::kDiagnosisError;
}

ErrorType TypeOf(const std::string &can, const std::string &ann) {
  if (ann == can) return ErrorType::kCorrect;
  if (can.empty()) return ErrorType::kInsertion;
  if (ann.empty()) return ErrorType::kDeletion;
  return ErrorType::kSubstitution;
}

}  // namespace

std::vector<ScoredSlot> score_slots(std::span<const std::string> canonical,
                                    std::span<const std::string> annotated,
                                    std::span<const std::string> recognized) {
  const PivotView ann = Pivot(canonical, annotated);
  const PivotView rec = Pivot(canonical, recognized);
  std::vector<ScoredSlot> slots;
  auto emit = [&](const std::string &c, const std::string &a, const std::string &r) {
    slots.push_back({c, a, r, TypeOf(c, a), Decide(c, a, r)});
  };
  static const std::string kAbsent;
  for (std::size_t region = 0; region <= canonical.size(); ++region) {
    const auto &ia = ann.inserted[region];
    const auto &ir = rec.inserted[region];
    for (std::size_t k = 0; k < std::max(ia.size(), ir.size()); ++k) {
      emit(kAbsent, k < ia.size() ? ia[k] : kAbsent, k < ir.size() ? ir[k] : kAbsent);
    }
    if (region < canonical.size()) emit(canonical[region], ann.at[region], rec.at[region]);
  }
  return slots;
}

HierarchicalCounts hierarchical_score(std::span<const std::string> canonical,
                                      std::span<const std::string> annotated,
                                      std::span<const std::string> recognized) {
  HierarchicalCounts c;
  for (const auto &s : score_slots(canonical, annotated, recognized)) {
    switch (s.outcome) {
      case Outcome::kTrueAccept: ++c.ta; break;
      case Outcome::kFalseRejection: ++c.fr; break;
      case Outcome::kFalseAccept: ++c.fa; break;
      case Outcome::kCorrectDiagnosis: ++c.tr_correct_diag; break;
      case Outcome::kDiagnosisError: ++c.tr_diag_error; break;
    }
  }
  return c;
}

MddMetrics metrics(const HierarchicalCounts &c) {
  MddMetrics m;
  const double tr = static_cast<double>(c.tr());
  if (c.tr() + c.fr > 0) m.precision = tr / static_cast<double>(c.tr() + c.fr);
  else m.precision_undefined = true;
  if (c.tr() + c.fa > 0) m.recall = tr / static_cast<double>(c.tr() + c.fa);
  else m.recall_undefined = true;
  if (m.precision + m.recall > 0)
    m.f_measure = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  return m;
}

void TypeBreakdown::add(std::span<const ScoredSlot> slots) {
  for (const auto &s : slots) {
    Row *row = nullptr;
    switch (s.annotated_type) {
      case ErrorType::kCorrect: continue;
      case ErrorType::kSubstitution: row = &substitution; break;
      case ErrorType::kInsertion: row = &insertion; break;
      case ErrorType::kDeletion: row = &deletion; break;
    }
    ++row->total;
    if (s.outcome == Outcome::kCorrectDiagnosis) ++row->correct_diag;
    else if (s.outcome == Outcome::kDiagnosisError) ++row->diag_error;
    else ++row->false_accept;
  }
}

long ConfusionMatrix::total() const {
  long n = 0;
  for (long c : counts) n += c;
  return n;
}

ConfusionMatrix confusion_matrix(std::span<const std::pair<std::string, std::string>> pairs,
                                 std::span<const std::string> subset, const PhoneSet &phones) {
  ConfusionMatrix m;
  m.labels.assign(subset.begin(), subset.end());
  for (const auto &s : m.labels)
    if (!phones.contains(s)) throw DataError("confusion matrix: unknown symbol '" + s + "'");
  m.counts.assign(m.labels.size() * m.labels.size(), 0);
  auto pos = [&](const std::string &s) -> long {
    auto it = std::find(m.labels.begin(), m.labels.end(), s);
    return it == m.labels.end() ? -1 : static_cast<long>(it - m.labels.begin());
  };
  for (const auto &[annotated, recognized] : pairs) {
    for (const auto *s : {&annotated, &recognized})
      if (!phones.contains(*s)) throw DataError("confusion matrix: unknown symbol '" + *s + "'");
    const long r = pos(annotated), c = pos(recognized);
    if (r < 0 || c < 0) continue;
    ++m.counts[static_cast<std::size_t>(r) * m.labels.size() + static_cast<std::size_t>(c)];
  }
  return m;
}

const std::vector<std::string> &kVowelSubset() {
  static const std::vector<std::string> v{"aa", "ah", "ae", "eh", "ih", "iy"};
  return v;
}

const std::vector<std::string> &kConsonantSubset() {
  static const std::vector<std::string> v{"d", "dh", "t", "sh", "s", "z"};
  return v;
}

void CorpusScore::add(std::span<const std::string> canonical, std::span<const std::string> annotated,
                      std::span<const std::string> recognized) {
  ++utterances;
  const Alignment rec_align = edit_align(annotated, recognized);
  recognition.add(rec_align);
  for (auto &p : rec_align.paired()) ++pairs[std::move(p)];
  const auto slots = score_slots(canonical, annotated, recognized);
  types.add(slots);
  for (const auto &s : slots) {
    switch (s.outcome) {
      case Outcome::kTrueAccept: ++counts.ta; break;
      case Outcome::kFalseRejection: ++counts.fr; break;
      case Outcome::kFalseAccept: ++counts.fa; break;
      case Outcome::kCorrectDiagnosis: ++counts.tr_correct_diag; break;
      case Outcome::kDiagnosisError: ++counts.tr_diag_error; break;
    }
  }
}

CorpusScore &CorpusScore::operator+=(const CorpusScore &o) {
  utterances += o.utterances;
  recognition += o.recognition;
  counts += o.counts;
  auto merge = [](TypeBreakdown::Row &a, const TypeBreakdown::Row &b) {
    a.total += b.total;
    a.correct_diag += b.correct_diag;
    a.diag_error += b.diag_error;
    a.false_accept += b.false_accept;
  };
  merge(types.substitution, o.types.substitution);
  merge(types.insertion, o.types.insertion);
  merge(types.deletion, o.types.deletion);
  for (const auto &[k, v] : o.pairs) pairs[k] += v;
  return *this;
}

std::vector<std::pair<std::string, std::string>> CorpusScore::expanded_pairs() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto &[k, v] : pairs)
    for (long i = 0; i < v; ++i) out.push_back(k);
  return out;
}

namespace {

double Pct(long num, long den) { return den > 0 ? 100.0 * static_cast<double>(num) / den : 0.0; }

std::string Cell(long count, long den) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f%%(%ld)", Pct(count, den), count);
  return buf;
}

void AppendMatrix(std::ostringstream &os, const ConfusionMatrix &m, const char *title) {
  os << title << " (rows: annotated, columns: recognized)\n";
  char buf[32];
  os << "      ";
  for (const auto &l : m.labels) {
    std::snprintf(buf, sizeof buf, "%7s", l.c_str());
    os << buf;
  }
  os << '\n';
  for (std::size_t r = 0; r < m.labels.size(); ++r) {
    std::snprintf(buf, sizeof buf, "%-6s", m.labels[r].c_str());
    os << buf;
    for (std::size_t c = 0; c < m.labels.size(); ++c) {
      std::snprintf(buf, sizeof buf, "%7ld", m.at(r, c));
      os << buf;
    }
    os << '\n';
  }
}

nlohmann::ordered_json MatrixJson(const ConfusionMatrix &m) {
  nlohmann::ordered_json j;
  j["labels"] = m.labels;
  auto rows = nlohmann::ordered_json::array();
  for (std::size_t r = 0; r < m.labels.size(); ++r) {
    std::vector<long> row(m.counts.begin() + static_cast<long>(r * m.labels.size()),
                          m.counts.begin() + static_cast<long>((r + 1) * m.labels.size()));
    rows.push_back(row);
  }
  j["counts"] = rows;
  return j;
}

}  // namespace

std::string format_report(const CorpusScore &score, const PhoneSet &phones) {
  const auto &c = score.counts;
  const MddMetrics m = metrics(c);
  const long correct = c.ta + c.fr, wrong = c.fa + c.tr();
  std::ostringstream os;
  char buf[256];
  os << "utterances: " << score.utterances << "\n\n";
  std::snprintf(buf, sizeof buf, "%-16s %-16s %-16s %-16s %-16s\n", "True Accept", "False Rejection",
                "False Accept", "TR Correct Diag", "TR Diag Error");
  os << buf;
  std::snprintf(buf, sizeof buf, "%-16s %-16s %-16s %-16s %-16s\n", Cell(c.ta, correct).c_str(),
                Cell(c.fr, correct).c_str(), Cell(c.fa, wrong).c_str(),
                Cell(c.tr_correct_diag, c.tr()).c_str(), Cell(c.tr_diag_error, c.tr()).c_str());
  os << buf << '\n';
  std::snprintf(buf, sizeof buf, "Recall %.2f%%  Precision %.2f%%  F-measure %.2f%%  PER %.2f%%\n",
                100 * m.recall, 100 * m.precision, 100 * m.f_measure, 100 * score.recognition.rate());
  os << buf;
  std::snprintf(buf, sizeof buf, "PER detail: S=%ld D=%ld I=%ld N=%ld\n\n", score.recognition.substitutions,
                score.recognition.deletions, score.recognition.insertions, score.recognition.ref_length);
  os << buf;

  os << "Mispronunciation types\n";
  std::snprintf(buf, sizeof buf, "%-14s %-16s %-16s %-16s\n", "", "Substitution", "Insertion", "Deletion");
  os << buf;
  const auto &t = score.types;
  auto row = [&](const char *name, long TypeBreakdown::Row::*field) {
    auto cell = [&](const TypeBreakdown::Row &r) {
      return field == &TypeBreakdown::Row::total ? std::to_string(r.total) : Cell(r.*field, r.total);
    };
    std::snprintf(buf, sizeof buf, "%-14s %-16s %-16s %-16s\n", name, cell(t.substitution).c_str(),
                  cell(t.insertion).c_str(), cell(t.deletion).c_str());
    os << buf;
  };
  row("Error nums", &TypeBreakdown::Row::total);
  row("Correct Diag.", &TypeBreakdown::Row::correct_diag);
  row("Diag. Error", &TypeBreakdown::Row::diag_error);
  row("False Accept", &TypeBreakdown::Row::false_accept);
  os << '\n';

  const auto pairs = score.expanded_pairs();
  AppendMatrix(os, confusion_matrix(pairs, kVowelSubset(), phones), "Vowel confusions");
  os << '\n';
  AppendMatrix(os, confusion_matrix(pairs, kConsonantSubset(), phones), "Consonant confusions");
  return os.str();
}

nlohmann::ordered_json report_json(const CorpusScore &score, const PhoneSet &phones) {
  const auto &c = score.counts;
  const MddMetrics m = metrics(c);
  nlohmann::ordered_json j;
  j["utterances"] = score.utterances;
  j["counts"] = {{"true_accept", c.ta},
                 {"false_rejection", c.fr},
                 {"false_accept", c.fa},
                 {"tr_correct_diagnosis", c.tr_correct_diag},
                 {"tr_diagnosis_error", c.tr_diag_error}};
  j["metrics"] = {{"precision", m.precision},
                  {"recall", m.recall},
                  {"f_measure", m.f_measure},
                  {"precision_undefined", m.precision_undefined},
                  {"recall_undefined", m.recall_undefined}};
  j["per"] = {{"rate", score.recognition.rate()},
              {"substitutions", score.recognition.substitutions},
              {"deletions", score.recognition.deletions},
              {"insertions", score.recognition.insertions},
              {"reference_length", score.recognition.ref_length}};
  auto row = [](const TypeBreakdown::Row &r) {
    return nlohmann::ordered_json{{"total", r.total},
                                  {"correct_diagnosis", r.correct_diag},
                                  {"diagnosis_error", r.diag_error},
                                  {"false_accept", r.false_accept}};
  };
  j["types"] = {{"substitution", row(score.types.substitution)},
                {"insertion", row(score.types.insertion)},
                {"deletion", row(score.types.deletion)}};
  const auto pairs = score.expanded_pairs();
  j["confusion"] = {{"vowels", MatrixJson(confusion_matrix(pairs, kVowelSubset(), phones))},
                    {"consonants", MatrixJson(confusion_matrix(pairs, kConsonantSubset(), phones))}};
  return j;
}

}  // namespace mdd::eval
