// src/config.cpp

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

#include "mdd/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <fstream>
#include <sstream>

#include "mdd/error.hpp"

namespace mdd {

namespace {

std::string FormatDouble(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

double ParseDouble(const std::string &key, const std::string &s) {
  double v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw UsageError("config " + key + ": '" + s + "' is not a number");
  return v;
}

std::uint64_t ParseUnsigned(const std::string &key, const std::string &s) {
  std::uint64_t v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw UsageError("config " + key + ": '" + s + "' is not a non-negative integer");
  return v;
}

bool ParseBool(const std::string &key, const std::string &s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw UsageError("config " + key + ": '" + s + "' is not a boolean");
}

ConfigField SizeField(std::string key, std::string help, std::size_t RunConfig::*outer) {
  return {key, std::move(help), [outer](const RunConfig &c) { return std::to_string(c.*outer); },
          [outer, key](RunConfig &c, const std::string &v) { c.*outer = ParseUnsigned(key, v); }};
}

ConfigField ModelSizeField(std::string key, std::string help, std::size_t ModelConfig::*inner) {
  return {key, std::move(help), [inner](const RunConfig &c) { return std::to_string(c.model.*inner); },
          [inner, key](RunConfig &c, const std::string &v) { c.model.*inner = ParseUnsigned(key, v); }};
}

ConfigField DoubleField(std::string key, std::string help, double RunConfig::*outer) {
  return {key, std::move(help), [outer](const RunConfig &c) { return FormatDouble(c.*outer); },
          [outer, key](RunConfig &c, const std::string &v) { c.*outer = ParseDouble(key, v); }};
}

ConfigField BoolField(std::string key, std::string help, bool RunConfig::*outer) {
  return {key, std::move(help), [outer](const RunConfig &c) { return std::string(c.*outer ? "true" : "false"); },
          [outer, key](RunConfig &c, const std::string &v) { c.*outer = ParseBool(key, v); }};
}

std::vector<ConfigField> BuildFields() {
  std::vector<ConfigField> f;
  f.push_back(ModelSizeField("model.embed_dim", "sentence embedding width", &ModelConfig::embed_dim));
  f.push_back(ModelSizeField("model.hidden", "Bi-LSTM hidden units per direction", &ModelConfig::hidden));
  f.push_back(ModelSizeField("model.conv_channels", "channels of each audio convolution", &ModelConfig::conv_channels));
  f.push_back(ModelSizeField("model.conv_layers", "stride-2 audio convolutions", &ModelConfig::conv_layers));
  f.push_back(ModelSizeField("model.audio_layers", "stacked audio Bi-LSTMs", &ModelConfig::audio_layers));
  f.push_back({"model.dropout", "sentence encoder dropout (train only)",
               [](const RunConfig &c) { return FormatDouble(c.model.dropout); },
               [](RunConfig &c, const std::string &v) { c.model.dropout = ParseDouble("model.dropout", v); }});
  f.push_back({"model.scaled_attention", "divide attention scores by sqrt(width)",
               [](const RunConfig &c) { return std::string(c.model.scaled_attention ? "true" : "false"); },
               [](RunConfig &c, const std::string &v) {
                 c.model.scaled_attention = ParseBool("model.scaled_attention", v);
               }});
  f.push_back({"model.sentence_unit", "sentence encoder input: phoneme or character",
               [](const RunConfig &c) { return SentenceUnitName(c.sentence_unit); },
               [](RunConfig &c, const std::string &v) { c.sentence_unit = ParseSentenceUnit(v); }});

  f.push_back(DoubleField("optimizer.learning_rate", "Adam step size", &RunConfig::learning_rate));
  f.push_back(DoubleField("optimizer.clip", "global gradient norm bound", &RunConfig::clip));
  f.push_back(SizeField("optimizer.batch_size", "utterances per step", &RunConfig::batch_size));
  f.push_back(SizeField("optimizer.epochs", "passes over the training set", &RunConfig::epochs));
  f.push_back(BoolField("optimizer.halve_on_plateau", "halve the step size when dev F stalls",
                        &RunConfig::halve_on_plateau));
  f.push_back(SizeField("optimizer.plateau_patience", "epochs without dev F gain before halving",
                        &RunConfig::plateau_patience));
  f.push_back(SizeField("optimizer.early_stop_patience", "stop after this many epochs without dev F gain (0 = off)",
                        &RunConfig::early_stop_patience));

  f.push_back({"augment.method", "prompt augmentation: none, ps, vc or cp",
               [](const RunConfig &c) { return augment::MethodName(c.augment_method); },
               [](RunConfig &c, const std::string &v) { c.augment_method = augment::ParseMethod(v); }});
  f.push_back(DoubleField("augment.rate", "fraction of prompt positions modified", &RunConfig::augment_rate));
  f.push_back(BoolField("augment.exact_count", "modify exactly ceil(rate * N) positions",
                        &RunConfig::augment_exact_count));
  f.push_back(DoubleField("augment.ps_substitute", "PS share of substitutions", &RunConfig::ps_substitute));
  f.push_back(DoubleField("augment.ps_delete", "PS share of deletions", &RunConfig::ps_delete));
  f.push_back(DoubleField("augment.ps_insert", "PS share of insertions", &RunConfig::ps_insert));
  f.push_back({"augment.confusion_table", "confusion pairs file for CP",
               [](const RunConfig &c) { return c.confusion_table; },
               [](RunConfig &c, const std::string &v) { c.confusion_table = v; }});

  f.push_back(SizeField("decode.beam", "prefix beam width", &RunConfig::beam));
  f.push_back(DoubleField("decode.prune_floor", "frame log-probability below which a symbol is not expanded",
                          &RunConfig::prune_floor));

  f.push_back({"run.seed", "seed of every random stream", [](const RunConfig &c) { return std::to_string(c.seed); },
               [](RunConfig &c, const std::string &v) { c.seed = ParseUnsigned("run.seed", v); }});
  f.push_back({"run.precision", "float32 (parameters rounded after each step) or float64",
               [](const RunConfig &c) {
                 return std::string(c.precision == nd::Precision::kFloat32 ? "float32" : "float64");
               },
               [](RunConfig &c, const std::string &v) {
                 if (v == "float32")
                   c.precision = nd::Precision::kFloat32;
                 else if (v == "float64")
                   c.precision = nd::Precision::kFloat64;
                 else
                   throw UsageError("config run.precision: expected float32 or float64, got '" + v + "'");
               }});
  return f;
}

const ConfigField &FindField(const std::string &key) {
  for (const auto &f : RunConfigFields())
    if (f.key == key) return f;
  throw UsageError("unknown config key '" + key + "'");
}

}  // namespace

const std::vector<ConfigField> &RunConfigFields() {
  static const std::vector<ConfigField> fields = BuildFields();
  return fields;
}

void RunConfig::validate() const {
  model.validate();
  auto require = [](bool ok, const std::string &what) {
    if (!ok) throw UsageError("config: " + what);
  };
  require(learning_rate > 0, "optimizer.learning_rate must be positive");
  require(clip > 0, "optimizer.clip must be positive");
  require(batch_size > 0, "optimizer.batch_size must be positive");
  require(epochs > 0, "optimizer.epochs must be positive");
  require(plateau_patience > 0, "optimizer.plateau_patience must be positive");
  require(beam > 0, "decode.beam must be positive");
  require(prune_floor <= 0, "decode.prune_floor must not be positive");
  require(augment_rate >= 0 && augment_rate <= 1, "augment.rate must lie in [0, 1]");
  require(ps_substitute >= 0 && ps_delete >= 0 && ps_insert >= 0 && ps_substitute + ps_delete + ps_insert > 0,
          "PS shares must be non-negative with a positive sum");
  require(augment_method != augment::Method::kCP || !confusion_table.empty(),
          "augment.method = cp needs augment.confusion_table");
}

void RunConfig::set(const std::string &key, const std::string &value) { FindField(key).set(*this, value); }

std::string RunConfig::get(const std::string &key) const { return FindField(key).get(*this); }

void RunConfig::override_with(const std::string &assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw UsageError("override '" + assignment + "' is not section.key=value");
  set(assignment.substr(0, eq), assignment.substr(eq + 1));
}

RunConfig RunConfig::Parse(const std::string &text) {
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error &e) {
    throw UsageError(std::string("config: ") + e.what());
  }
  RunConfig c;
  for (const auto &[section, body] : tree) {
    if (body.empty()) throw UsageError("config: key '" + section + "' outside a section");
    for (const auto &[key, value] : body) c.set(section + "." + key, value.get_value<std::string>());
  }
  return c;
}

RunConfig RunConfig::Load(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return Parse(ss.str());
}

std::string RunConfig::ToIni() const {
  std::string out, section;
  for (const auto &f : RunConfigFields()) {
    const std::string s = f.key.substr(0, f.key.find('.'));
    if (s != section) {
      if (!out.empty()) out += '\n';
      out += "[" + s + "]\n";
      section = s;
    }
    out += f.key.substr(f.key.find('.') + 1) + " = " + f.get(*this) + "\n";
  }
  return out;
}

}  // namespace mdd
