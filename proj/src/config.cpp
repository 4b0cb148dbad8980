// Copyright 2026 The Feroma Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "feroma/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "feroma/error.hpp"

namespace feroma {
namespace {

namespace pt = boost::property_tree;

std::string Trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> SplitList(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const auto item = Trim(s.substr(start, comma == std::string_view::npos ? s.npos : comma - start));
    if (!item.empty()) out.push_back(item);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string FormatDouble(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

double ParseDouble(const std::string& key, const std::string& s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw ConfigError(key + ": expected a real number, got '" + s + "'");
  }
  return v;
}

std::uint64_t ParseUnsigned(const std::string& key, const std::string& s) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + s + "'");
  }
  return v;
}

bool ParseBool(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError(key + ": expected a boolean, got '" + s + "'");
}

std::string ColorName(int c) {
  switch (c) {
    case 0:
      return "red";
    case 1:
      return "green";
    case 2:
      return "blue";
    default:
      return "original";
  }
}

int ParseColor(const std::string& key, const std::string& s) {
  if (s == "original") return kOriginalColor;
  if (s == "red") return 0;
  if (s == "green") return 1;
  if (s == "blue") return 2;
  throw ConfigError(key + ": unknown color '" + s + "'");
}

// "leave:5@10" or "join:20@12".
ChurnEvent ParseChurn(const std::string& key, const std::string& s) {
  const auto colon = s.find(':');
  const auto at = s.find('@');
  if (colon == std::string::npos || at == std::string::npos || at < colon) {
    throw ConfigError(key + ": churn events look like leave:<client>@<round>");
  }
  ChurnEvent e;
  const std::string kind = s.substr(0, colon);
  if (kind == "join") {
    e.join = true;
  } else if (kind != "leave") {
    throw ConfigError(key + ": unknown churn event '" + kind + "'");
  }
  e.client = static_cast<int>(ParseUnsigned(key, s.substr(colon + 1, at - colon - 1)));
  e.round = ParseUnsigned(key, s.substr(at + 1));
  return e;
}

template <typename T>
std::string JoinList(const std::vector<T>& xs, const std::function<std::string(const T&)>& f) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ", ";
    out += f(xs[i]);
  }
  return out;
}

struct Field {
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

using FieldTable = std::vector<std::pair<std::string, Field>>;

template <typename T>
Field Unsigned(T FederationConfig::*member) {
  return {[member](const ExperimentConfig& c) { return std::to_string(c.federation.*member); },
          [member](ExperimentConfig& c, const std::string& v) {
            c.federation.*member = static_cast<T>(ParseUnsigned("value", v));
          }};
}

// Keys in serialization order; the section is the part before the dot.
const FieldTable& Fields() {
  static const FieldTable table = [] {
    FieldTable t;
    auto add = [&t](std::string key, Field f) { t.emplace_back(std::move(key), std::move(f)); };
    auto fed_double = [](double FederationConfig::*m) {
      return Field{[m](const ExperimentConfig& c) { return FormatDouble(c.federation.*m); },
                   [m](ExperimentConfig& c, const std::string& v) {
                     c.federation.*m = ParseDouble("value", v);
                   }};
    };
    auto fed_bool = [](bool FederationConfig::*m) {
      return Field{[m](const ExperimentConfig& c) {
                     return std::string(c.federation.*m ? "true" : "false");
                   },
                   [m](ExperimentConfig& c, const std::string& v) {
                     c.federation.*m = ParseBool("value", v);
                   }};
    };

    add("run.output_dir", {[](const ExperimentConfig& c) { return c.output_dir.string(); },
                           [](ExperimentConfig& c, const std::string& v) { c.output_dir = v; }});
    add("run.seeds",
        {[](const ExperimentConfig& c) {
           return JoinList<std::uint64_t>(c.seeds,
                                          [](const std::uint64_t& s) { return std::to_string(s); });
         },
         [](ExperimentConfig& c, const std::string& v) {
           c.seeds.clear();
           for (const auto& item : SplitList(v)) c.seeds.push_back(ParseUnsigned("run.seeds", item));
         }});

    add("federation.rounds", Unsigned(&FederationConfig::rounds));
    add("federation.warmup_rounds", Unsigned(&FederationConfig::warmup_rounds));
    add("federation.participation_rate", fed_double(&FederationConfig::participation_rate));
    add("federation.aggregation",
        {[](const ExperimentConfig& c) {
           return std::string(AggregationName(c.federation.aggregation));
         },
         [](ExperimentConfig& c, const std::string& v) {
           c.federation.aggregation = ParseAggregation(v);
         }});
    add("federation.threshold_enabled", fed_bool(&FederationConfig::threshold_enabled));
    add("federation.threshold",
        {[](const ExperimentConfig& c) {
           return c.federation.threshold ? FormatDouble(*c.federation.threshold)
                                         : std::string("auto");
         },
         [](ExperimentConfig& c, const std::string& v) {
           if (v == "auto") {
             c.federation.threshold.reset();
           } else {
             c.federation.threshold = ParseDouble("federation.threshold", v);
           }
         }});
    add("federation.train_distance",
        {[](const ExperimentConfig& c) {
           return std::string(DistanceKindName(c.federation.train_distance));
         },
         [](ExperimentConfig& c, const std::string& v) {
           c.federation.train_distance = ParseDistanceKind(v);
         }});
    add("federation.test_distance",
        {[](const ExperimentConfig& c) {
           return std::string(DistanceKindName(c.federation.test_distance));
         },
         [](ExperimentConfig& c, const std::string& v) {
           c.federation.test_distance = ParseDistanceKind(v);
         }});
    add("federation.standardize_distances", fed_bool(&FederationConfig::standardize_distances));
    add("federation.eval_fraction", fed_double(&FederationConfig::eval_fraction));
    add("federation.labels_per_class", Unsigned(&FederationConfig::labels_per_class));
    add("federation.test_clients", Unsigned(&FederationConfig::test_clients));
    add("federation.unseen_fraction", fed_double(&FederationConfig::unseen_fraction));
    add("federation.churn",
        {[](const ExperimentConfig& c) {
           return JoinList<ChurnEvent>(c.federation.churn, [](const ChurnEvent& e) {
             return std::string(e.join ? "join:" : "leave:") + std::to_string(e.client) + "@" +
                    std::to_string(e.round);
           });
         },
         [](ExperimentConfig& c, const std::string& v) {
           c.federation.churn.clear();
           for (const auto& item : SplitList(v)) {
             c.federation.churn.push_back(ParseChurn("federation.churn", item));
           }
         }});

    add("model.arch",
        {[](const ExperimentConfig& c) { return std::string(ArchKindName(c.federation.arch)); },
         [](ExperimentConfig& c, const std::string& v) { c.federation.arch = ParseArchKind(v); }});
    add("model.hidden_width", Unsigned(&FederationConfig::hidden_width));
    add("model.learning_rate",
        {[](const ExperimentConfig& c) { return FormatDouble(c.federation.train.learning_rate); },
         [](ExperimentConfig& c, const std::string& v) {
           c.federation.train.learning_rate = ParseDouble("model.learning_rate", v);
         }});
    add("model.momentum",
        {[](const ExperimentConfig& c) { return FormatDouble(c.federation.train.momentum); },
         [](ExperimentConfig& c, const std::string& v) {
           c.federation.train.momentum = ParseDouble("model.momentum", v);
         }});
    add("model.batch_size",
        {[](const ExperimentConfig& c) { return std::to_string(c.federation.train.batch_size); },
         [](ExperimentConfig& c, const std::string& v) {
           c.federation.train.batch_size = ParseUnsigned("model.batch_size", v);
         }});
    add("model.local_epochs",
        {[](const ExperimentConfig& c) { return std::to_string(c.federation.train.local_epochs); },
         [](ExperimentConfig& c, const std::string& v) {
           c.federation.train.local_epochs = ParseUnsigned("model.local_epochs", v);
         }});

    add("dpe.pca_dim",
        {[](const ExperimentConfig& c) { return std::to_string(c.federation.dpe.pca_dim); },
         [](ExperimentConfig& c, const std::string& v) {
           c.federation.dpe.pca_dim = ParseUnsigned("dpe.pca_dim", v);
         }});
    add("dpe.reference_points",
        {[](const ExperimentConfig& c) {
           return std::to_string(c.federation.dpe.reference_points);
         },
         [](ExperimentConfig& c, const std::string& v) {
           c.federation.dpe.reference_points = ParseUnsigned("dpe.reference_points", v);
         }});
    add("dpe.masks",
        {[](const ExperimentConfig& c) { return std::to_string(c.federation.dpe.masks); },
         [](ExperimentConfig& c, const std::string& v) {
           c.federation.dpe.masks = ParseUnsigned("dpe.masks", v);
         }});
    add("dpe.mask_prob",
        {[](const ExperimentConfig& c) { return FormatDouble(c.federation.dpe.mask_prob); },
         [](ExperimentConfig& c, const std::string& v) {
           c.federation.dpe.mask_prob = ParseDouble("dpe.mask_prob", v);
         }});
    add("dpe.epsilon",
        {[](const ExperimentConfig& c) { return FormatDouble(c.federation.dpe.epsilon); },
         [](ExperimentConfig& c, const std::string& v) {
           c.federation.dpe.epsilon = ParseDouble("dpe.epsilon", v);
         }});
    add("dpe.dp_enabled",
        {[](const ExperimentConfig& c) {
           return std::string(c.federation.dpe.dp_enabled ? "true" : "false");
         },
         [](ExperimentConfig& c, const std::string& v) {
           c.federation.dpe.dp_enabled = ParseBool("dpe.dp_enabled", v);
         }});
    add("dpe.pca_seed",
        {[](const ExperimentConfig& c) { return std::to_string(c.federation.dpe.pca_seed); },
         [](ExperimentConfig& c, const std::string& v) {
           c.federation.dpe.pca_seed = ParseUnsigned("dpe.pca_seed", v);
         }});

    auto sched_unsigned = [](std::size_t DriftSchedule::*m, std::string key) {
      return Field{[m](const ExperimentConfig& c) {
                     return std::to_string(c.federation.schedule.*m);
                   },
                   [m, key](ExperimentConfig& c, const std::string& v) {
                     c.federation.schedule.*m = ParseUnsigned(key, v);
                   }};
    };
    auto sched_double = [](double DriftSchedule::*m, std::string key) {
      return Field{[m](const ExperimentConfig& c) {
                     return FormatDouble(c.federation.schedule.*m);
                   },
                   [m, key](ExperimentConfig& c, const std::string& v) {
                     c.federation.schedule.*m = ParseDouble(key, v);
                   }};
    };
    add("data.type",
        {[](const ExperimentConfig& c) {
           return std::string(NonIidTypeName(c.federation.schedule.type));
         },
         [](ExperimentConfig& c, const std::string& v) {
           c.federation.schedule.type = ParseNonIidType(v);
         }});
    add("data.level",
        {[](const ExperimentConfig& c) {
           return std::string(NonIidLevelName(c.federation.schedule.level));
         },
         [](ExperimentConfig& c, const std::string& v) {
           c.federation.schedule.level = ParseNonIidLevel(v);
         }});
    add("data.clients", sched_unsigned(&DriftSchedule::clients, "data.clients"));
    add("data.samples_per_client",
        sched_unsigned(&DriftSchedule::samples_per_client, "data.samples_per_client"));
    add("data.drift_every", sched_unsigned(&DriftSchedule::drift_every, "data.drift_every"));
    add("data.num_classes", sched_unsigned(&DriftSchedule::num_classes, "data.num_classes"));
    add("data.feature_dim", sched_unsigned(&DriftSchedule::feature_dim, "data.feature_dim"));
    add("data.separation", sched_double(&DriftSchedule::separation, "data.separation"));
    add("data.color_shift", sched_double(&DriftSchedule::color_shift, "data.color_shift"));
    add("data.recipes", sched_unsigned(&DriftSchedule::recipes, "data.recipes"));
    add("data.assignment",
        {[](const ExperimentConfig& c) {
           return std::string(AssignmentName(c.federation.schedule.assignment));
         },
         [](ExperimentConfig& c, const std::string& v) {
           c.federation.schedule.assignment = ParseAssignment(v);
         }});
    add("data.rotations",
        {[](const ExperimentConfig& c) {
           return JoinList<double>(c.federation.schedule.rotations,
                                   [](const double& d) { return FormatDouble(d); });
         },
         [](ExperimentConfig& c, const std::string& v) {
           c.federation.schedule.rotations.clear();
           for (const auto& item : SplitList(v)) {
             c.federation.schedule.rotations.push_back(ParseDouble("data.rotations", item));
           }
         }});
    add("data.colors",
        {[](const ExperimentConfig& c) {
           return JoinList<int>(c.federation.schedule.colors,
                                [](const int& k) { return ColorName(k); });
         },
         [](ExperimentConfig& c, const std::string& v) {
           c.federation.schedule.colors.clear();
           for (const auto& item : SplitList(v)) {
             c.federation.schedule.colors.push_back(ParseColor("data.colors", item));
           }
         }});
    add("data.idx_images", {[](const ExperimentConfig& c) { return c.idx_images; },
                            [](ExperimentConfig& c, const std::string& v) { c.idx_images = v; }});
    add("data.idx_labels", {[](const ExperimentConfig& c) { return c.idx_labels; },
                            [](ExperimentConfig& c, const std::string& v) { c.idx_labels = v; }});
    add("data.idx_limit",
        {[](const ExperimentConfig& c) { return std::to_string(c.idx_limit); },
         [](ExperimentConfig& c, const std::string& v) {
           c.idx_limit = ParseUnsigned("data.idx_limit", v);
         }});
    return t;
  }();
  return table;
}

const Field* FindField(const std::string& key) {
  for (const auto& [name, field] : Fields()) {
    if (name == key) return &field;
  }
  return nullptr;
}

void SetField(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  const Field* f = FindField(key);
  if (!f) throw ConfigError("unknown config key '" + key + "'");
  try {
    f->set(cfg, value);
  } catch (const ConfigError& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

}  // namespace

ExperimentConfig::ExperimentConfig() {
  federation.schedule.feature_dim = 784;
  federation.schedule.num_classes = 10;
  federation.schedule.clients = 20;
  federation.test_clients = 20;
}

void ExperimentConfig::Validate() const {
  if (seeds.empty()) throw ConfigError("run.seeds must list at least one seed");
  if (output_dir.empty()) throw ConfigError("run.output_dir must be set");
  if (idx_images.empty() != idx_labels.empty()) {
    throw ConfigError("data.idx_images and data.idx_labels must be set together");
  }
  federation.Validate();
}

ExperimentConfig ParseConfig(std::string_view text) {
  pt::ptree tree;
  std::istringstream in{std::string(text)};
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.message() + " (line " +
                      std::to_string(e.line()) + ")");
  }
  ExperimentConfig cfg;
  for (const auto& [section, body] : tree) {
    if (!body.data().empty()) {
      throw ConfigError("config key '" + section + "' must live inside a section");
    }
    for (const auto& [key, value] : body) {
      SetField(cfg, section + "." + key, Trim(value.data()));
    }
  }
  return cfg;
}

ExperimentConfig LoadConfig(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ParseConfig(ss.str());
}

std::string SerializeConfig(const ExperimentConfig& cfg) {
  std::ostringstream out;
  std::string current;
  for (const auto& [name, field] : Fields()) {
    const auto dot = name.find('.');
    const std::string section = name.substr(0, dot);
    if (section != current) {
      if (!current.empty()) out << '\n';
      out << '[' << section << "]\n";
      current = section;
    }
    out << name.substr(dot + 1) << " = " << field.get(cfg) << '\n';
  }
  return out.str();
}

void ApplyOverride(ExperimentConfig& cfg, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError("override must look like section.key=value");
  }
  SetField(cfg, Trim(assignment.substr(0, eq)), Trim(assignment.substr(eq + 1)));
}

void AttachIdxPool(ExperimentConfig& cfg) {
  if (cfg.idx_images.empty()) return;
  auto pool = std::make_shared<IdxPool>(LoadIdx(cfg.idx_images, cfg.idx_labels, cfg.idx_limit));
  cfg.federation.schedule.feature_dim = pool->features.cols();
  cfg.federation.schedule.pool = std::move(pool);
}

}  // namespace feroma
