// Copyright 2026 The dpsynth Authors
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
#include "dpsynth/harness.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <istream>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>
#include <tuple>

#include "dpsynth/classifier.h"
#include "dpsynth/errors.h"
#include "dpsynth/format.h"
#include "dpsynth/gan.h"
#include "dpsynth/rng.h"
#include "json.hpp"

namespace dpsynth::harness {
namespace {

using nlohmann::json;

constexpr double kInf = std::numeric_limits<double>::infinity();

json EpsilonToJson(double e) {
  return std::isinf(e) ? json("inf") : json(e);
}

double EpsilonFromJson(const json& j) {
  if (j.is_string()) return ParseDouble(j.get<std::string>());
  return j.get<double>();
}

std::filesystem::path Resolve(const std::filesystem::path& base,
                              const std::string& p) {
  if (p.empty()) return {};
  const std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

template <typename T>
void ReadIf(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void ReadArchitecture(const json& j, gan::Architecture& a) {
  ReadIf(j, "noise_dim", a.noise_dim);
  ReadIf(j, "generator_hidden", a.generator_hidden);
  ReadIf(j, "discriminator_hidden", a.discriminator_hidden);
}

json ArchitectureJson(const gan::Architecture& a) {
  return {{"noise_dim", a.noise_dim},
          {"generator_hidden", a.generator_hidden},
          {"discriminator_hidden", a.discriminator_hidden}};
}

// Training data must never be test data.
void RequireTrainingData(const data::TabularDataset& ds) {
  if (ds.provenance() == data::Provenance::kTest) {
    throw StateError("test rows reached a training path");
  }
}

// Non-private runs must not draw from any noise mechanism.
void RequireNoMechanisms(const Rng& rng, double epsilon) {
  if (std::isinf(epsilon) && rng.counters().Total() != 0) {
    throw StateError("a non-private run invoked a noise mechanism");
  }
}

std::uint64_t ModelHash(ModelKind m) { return HashString(ModelName(m)); }

}  // namespace

std::string_view SettingName(Setting s) {
  switch (s) {
    case Setting::kClass:
      return "class";
    case Setting::kSingleSubgroup:
      return "single-subgroup";
    case Setting::kMultiSubgroup:
      return "multi-subgroup";
  }
  return "class";
}

Setting ParseSetting(std::string_view name) {
  if (name == "class") return Setting::kClass;
  if (name == "single-subgroup") return Setting::kSingleSubgroup;
  if (name == "multi-subgroup") return Setting::kMultiSubgroup;
  throw InvalidArgumentError("unknown setting '" + std::string(name) +
                             "' (expected class, single-subgroup or "
                             "multi-subgroup)");
}

std::string_view ModelName(ModelKind m) {
  switch (m) {
    case ModelKind::kPrivBayes:
      return "privbayes";
    case ModelKind::kDpWgan:
      return "dpwgan";
    case ModelKind::kPateGan:
      return "pategan";
  }
  return "privbayes";
}

ModelKind ParseModel(std::string_view name) {
  if (name == "privbayes") return ModelKind::kPrivBayes;
  if (name == "dpwgan") return ModelKind::kDpWgan;
  if (name == "pategan") return ModelKind::kPateGan;
  throw InvalidArgumentError("unknown model '" + std::string(name) +
                             "' (expected privbayes, dpwgan or pategan)");
}

void ExperimentConfig::Validate() const {
  if (l < 1 || k < 1) throw InvalidArgumentError("l and k must be at least 1");
  if (epsilons.empty()) throw InvalidArgumentError("no epsilon values given");
  for (double e : epsilons) {
    if (!(e > 0.0)) {
      throw InvalidArgumentError("epsilon values must be positive or inf, got " +
                                 FormatDouble(e));
    }
  }
  if (!(delta > 0.0 && delta < 1.0)) {
    throw InvalidArgumentError("delta must be in (0, 1)");
  }
  if (setting != Setting::kClass) {
    if (imbalances.empty()) {
      throw InvalidArgumentError("subgroup settings need imbalance ratios");
    }
    for (double r : imbalances) {
      if (!(r > 0.0 && r <= 0.5)) {
        throw InvalidArgumentError("imbalance ratios must be in (0, 0.5], got " +
                                   FormatDouble(r));
      }
    }
  }
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw InvalidArgumentError("test_fraction must be in (0, 1)");
  }
  if (min_subgroup_size < 1) {
    throw InvalidArgumentError("min_subgroup_size must be at least 1");
  }
  if (!(regularization > 0.0)) {
    throw InvalidArgumentError("regularization must be positive");
  }
}

std::vector<std::string> ExperimentConfig::ResolvedSubgroupAttributes(
    const data::Schema& schema) const {
  std::vector<std::string> attrs =
      subgroup_attributes.empty() ? schema.subgroup_columns() : subgroup_attributes;
  for (const std::string& a : attrs) schema.IndexOf(a);
  return attrs;
}

ExperimentConfig ExperimentConfig::FromJson(std::string_view text,
                                            const std::filesystem::path& base) {
  ExperimentConfig c;
  try {
    const json j = json::parse(text);
    if (!j.is_object()) throw InvalidArgumentError("config must be a JSON object");
    if (j.contains("data")) c.data_path = Resolve(base, j.at("data").get<std::string>());
    if (j.contains("schema")) {
      c.schema_path = Resolve(base, j.at("schema").get<std::string>());
    }
    if (j.contains("test_data")) {
      c.test_path = Resolve(base, j.at("test_data").get<std::string>());
    }
    if (j.contains("model")) c.model = ParseModel(j.at("model").get<std::string>());
    if (j.contains("epsilons")) {
      c.epsilons.clear();
      for (const auto& e : j.at("epsilons")) c.epsilons.push_back(EpsilonFromJson(e));
    }
    ReadIf(j, "delta", c.delta);
    ReadIf(j, "imbalances", c.imbalances);
    if (j.contains("setting")) {
      c.setting = ParseSetting(j.at("setting").get<std::string>());
    }
    ReadIf(j, "subgroup_attributes", c.subgroup_attributes);
    ReadIf(j, "l", c.l);
    ReadIf(j, "k", c.k);
    ReadIf(j, "seed", c.seed);
    if (j.contains("out")) c.output_dir = Resolve(base, j.at("out").get<std::string>());
    ReadIf(j, "test_fraction", c.test_fraction);
    ReadIf(j, "min_subgroup_size", c.min_subgroup_size);
    ReadIf(j, "classifiers", c.classifiers);
    ReadIf(j, "regularization", c.regularization);
    if (j.contains("privbayes")) {
      const json& p = j.at("privbayes");
      ReadIf(p, "degree", c.privbayes.degree);
      ReadIf(p, "structure_fraction", c.privbayes.structure_fraction);
      if (p.contains("utility_sensitivity")) {
        c.privbayes.utility_sensitivity = p.at("utility_sensitivity").get<double>();
      }
    }
    if (j.contains("dpwgan")) {
      const json& p = j.at("dpwgan");
      ReadArchitecture(p, c.dpwgan.architecture);
      ReadIf(p, "critic_clip", c.dpwgan.critic_clip);
      ReadIf(p, "critic_learning_rate", c.dpwgan.critic_learning_rate);
      ReadIf(p, "generator_learning_rate", c.dpwgan.generator_learning_rate);
      ReadIf(p, "batch_size", c.dpwgan.batch_size);
      ReadIf(p, "clip_norm", c.dpwgan.clip_norm);
      ReadIf(p, "noise_multiplier", c.dpwgan.noise_multiplier);
      ReadIf(p, "critic_steps", c.dpwgan.critic_steps);
      ReadIf(p, "gumbel_temperature", c.dpwgan.gumbel_temperature);
      ReadIf(p, "max_iterations", c.dpwgan.max_iterations);
    }
    if (j.contains("pategan")) {
      const json& p = j.at("pategan");
      ReadArchitecture(p, c.pategan.architecture);
      ReadIf(p, "teachers", c.pategan.teachers);
      if (p.contains("vote_scale") && !p.at("vote_scale").is_null()) {
        c.pategan.vote_scale = p.at("vote_scale").get<double>();
      }
      ReadIf(p, "target_queries", c.pategan.target_queries);
      ReadIf(p, "generator_learning_rate", c.pategan.generator_learning_rate);
      ReadIf(p, "teacher_learning_rate", c.pategan.teacher_learning_rate);
      ReadIf(p, "student_learning_rate", c.pategan.student_learning_rate);
      ReadIf(p, "batch_size", c.pategan.batch_size);
      ReadIf(p, "teacher_steps", c.pategan.teacher_steps);
      ReadIf(p, "student_steps", c.pategan.student_steps);
      ReadIf(p, "gumbel_temperature", c.pategan.gumbel_temperature);
      ReadIf(p, "max_iterations", c.pategan.max_iterations);
    }
  } catch (const json::exception& e) {
    throw InvalidArgumentError(std::string("malformed experiment config: ") +
                               e.what());
  }
  c.Validate();
  return c;
}

ExperimentConfig ExperimentConfig::Load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return FromJson(buf.str(), path.parent_path());
}

std::string ExperimentConfig::ToJson() const {
  json j;
  j["data"] = data_path.string();
  j["schema"] = schema_path.string();
  if (!test_path.empty()) j["test_data"] = test_path.string();
  j["model"] = ModelName(model);
  json eps = json::array();
  for (double e : epsilons) eps.push_back(EpsilonToJson(e));
  j["epsilons"] = std::move(eps);
  j["delta"] = delta;
  j["imbalances"] = imbalances;
  j["setting"] = SettingName(setting);
  j["subgroup_attributes"] = subgroup_attributes;
  j["l"] = l;
  j["k"] = k;
  j["seed"] = seed;
  j["out"] = output_dir.string();
  j["test_fraction"] = test_fraction;
  j["min_subgroup_size"] = min_subgroup_size;
  j["classifiers"] = classifiers;
  j["regularization"] = regularization;
  j["privbayes"] = {{"degree", privbayes.degree},
                    {"structure_fraction", privbayes.structure_fraction}};
  if (privbayes.utility_sensitivity) {
    j["privbayes"]["utility_sensitivity"] = *privbayes.utility_sensitivity;
  }
  json w = ArchitectureJson(dpwgan.architecture);
  w["critic_clip"] = dpwgan.critic_clip;
  w["critic_learning_rate"] = dpwgan.critic_learning_rate;
  w["generator_learning_rate"] = dpwgan.generator_learning_rate;
  w["batch_size"] = dpwgan.batch_size;
  w["clip_norm"] = dpwgan.clip_norm;
  w["noise_multiplier"] = dpwgan.noise_multiplier;
  w["critic_steps"] = dpwgan.critic_steps;
  w["gumbel_temperature"] = dpwgan.gumbel_temperature;
  w["max_iterations"] = dpwgan.max_iterations;
  j["dpwgan"] = std::move(w);
  json p = ArchitectureJson(pategan.architecture);
  p["teachers"] = pategan.teachers;
  p["vote_scale"] = pategan.vote_scale ? json(*pategan.vote_scale) : json(nullptr);
  p["target_queries"] = pategan.target_queries;
  p["generator_learning_rate"] = pategan.generator_learning_rate;
  p["teacher_learning_rate"] = pategan.teacher_learning_rate;
  p["student_learning_rate"] = pategan.student_learning_rate;
  p["batch_size"] = pategan.batch_size;
  p["teacher_steps"] = pategan.teacher_steps;
  p["student_steps"] = pategan.student_steps;
  p["gumbel_temperature"] = pategan.gumbel_temperature;
  p["max_iterations"] = pategan.max_iterations;
  j["pategan"] = std::move(p);
  return j.dump(2);
}

int WorkerCount() {
  if (const char* env = std::getenv(kWorkersEnv); env != nullptr && *env) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1) {
      throw InvalidArgumentError(std::string(kWorkersEnv) +
                                 " must be a positive integer, got '" + env + "'");
    }
    return static_cast<int>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void ParallelFor(std::size_t count, int workers,
                 const std::function<void(std::size_t)>& task) {
  if (count == 0) return;
  const std::size_t threads =
      std::min<std::size_t>(count, static_cast<std::size_t>(std::max(1, workers)));
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        task(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::string ImbalanceLabel(double imbalance) {
  return std::isnan(imbalance) ? "none" : FormatDouble(imbalance);
}

std::vector<std::size_t> MatchRows(const data::TabularDataset& dataset,
                                   const data::SubgroupKey& key) {
  const data::Schema& schema = dataset.schema();
  std::vector<std::pair<int, int>> want;
  for (std::size_t i = 0; i < key.attributes.size(); ++i) {
    const int col = schema.IndexOf(key.attributes[i]);
    const int code = schema.CodeOf(col, key.values[i]);
    if (code < 0) {
      throw InvalidArgumentError("unknown value '" + key.values[i] +
                                 "' for column " + key.attributes[i]);
    }
    want.emplace_back(col, code);
  }
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < dataset.rows(); ++r) {
    bool match = true;
    for (const auto& [col, code] : want) {
      if (dataset.at(r, col) != code) {
        match = false;
        break;
      }
    }
    if (match) rows.push_back(r);
  }
  return rows;
}

std::vector<double> MeasureSizes(const data::TabularDataset& dataset,
                                 const std::vector<data::SubgroupKey>& keys) {
  std::vector<double> out;
  out.reserve(keys.size());
  const double n = static_cast<double>(dataset.rows());
  for (const data::SubgroupKey& key : keys) {
    out.push_back(static_cast<double>(MatchRows(dataset, key).size()) / n);
  }
  return out;
}

namespace {

std::vector<data::SubgroupKey> ValueKeys(const data::Schema& schema,
                                         const std::string& column) {
  const int col = schema.IndexOf(column);
  std::vector<data::SubgroupKey> keys;
  for (int v = 0; v < schema.DomainSize(col); ++v) {
    keys.push_back({{column}, {schema.Label(col, v)}});
  }
  return keys;
}

}  // namespace

std::vector<PreparedCell> Prepare(const ExperimentConfig& config,
                                  const data::TabularDataset& full,
                                  const std::optional<data::TabularDataset>& test) {
  config.Validate();
  Rng split_rng(DeriveSeed({config.seed, HashString("split")}));
  data::TabularDataset train = full.WithProvenance(data::Provenance::kTrain);
  data::TabularDataset held_out = full;
  if (test) {
    if (!(test->schema() == full.schema())) {
      throw DataError("test data schema differs from the training data");
    }
    held_out = test->WithProvenance(data::Provenance::kTest);
  } else {
    auto [tr, te] = data::SplitTrainTest(full, config.test_fraction, split_rng);
    train = tr.WithProvenance(data::Provenance::kTrain);
    held_out = te.WithProvenance(data::Provenance::kTest);
  }
  const data::Schema& schema = full.schema();
  std::vector<PreparedCell> cells;
  if (config.setting == Setting::kClass) {
    cells.push_back({std::numeric_limits<double>::quiet_NaN(), train, held_out,
                     ValueKeys(schema, schema.class_column())});
    return cells;
  }
  const auto attrs = config.ResolvedSubgroupAttributes(schema);
  if (attrs.empty()) {
    throw InvalidArgumentError("subgroup settings need a subgroup attribute");
  }
  for (std::size_t i = 0; i < config.imbalances.size(); ++i) {
    const double ratio = config.imbalances[i];
    Rng train_rng(DeriveSeed({config.seed, HashString("prepare"), i, 0}));
    Rng test_rng(DeriveSeed({config.seed, HashString("prepare"), i, 1}));
    data::TabularDataset tr = data::ImbalanceSubgroup(
        data::BalanceClassWithinSubgroup(train, attrs.front(), train_rng),
        attrs.front(), ratio, train_rng);
    data::TabularDataset te = data::ImbalanceSubgroup(
        data::BalanceClassWithinSubgroup(held_out, attrs.front(), test_rng),
        attrs.front(), ratio, test_rng);
    std::vector<data::SubgroupKey> groups;
    if (config.setting == Setting::kSingleSubgroup) {
      groups = ValueKeys(schema, attrs.front());
    } else {
      for (const data::Subgroup& g :
           data::ExtractSubgroups(tr, attrs, config.min_subgroup_size)) {
        groups.push_back(g.key);
      }
    }
    cells.push_back({ratio, tr.WithProvenance(data::Provenance::kTrain),
                     te.WithProvenance(data::Provenance::kTest),
                     std::move(groups)});
  }
  return cells;
}

std::string RunId(ModelKind model, const SyntheticRun& run) {
  return std::string(ModelName(model)) + "/e" +
         std::to_string(run.epsilon_index) + "/i" +
         std::to_string(run.imbalance_index) + "/f" + std::to_string(run.fit) +
         "/s" + std::to_string(run.sample);
}

std::vector<SyntheticRun> Generate(const ExperimentConfig& config,
                                   const std::vector<PreparedCell>& cells,
                                   int workers, const ModelSink& sink) {
  config.Validate();
  const std::size_t ne = config.epsilons.size();
  const std::size_t ni = cells.size();
  const std::size_t nl = static_cast<std::size_t>(config.l);
  const std::size_t nk = static_cast<std::size_t>(config.k);
  std::vector<SyntheticRun> runs(ne * ni * nl * nk);
  std::mutex sink_mutex;
  ParallelFor(ne * ni * nl, workers, [&](std::size_t task) {
    const std::size_t fit = task % nl;
    const std::size_t ii = (task / nl) % ni;
    const std::size_t ei = task / (nl * ni);
    const double epsilon = config.epsilons[ei];
    const PreparedCell& cell = cells[ii];
    const std::size_t base = task * nk;
    for (std::size_t s = 0; s < nk; ++s) {
      SyntheticRun& r = runs[base + s];
      r.epsilon_index = ei;
      r.imbalance_index = ii;
      r.fit = static_cast<int>(fit);
      r.sample = static_cast<int>(s);
    }
    auto fail_all = [&](const Error& e) {
      for (std::size_t s = 0; s < nk; ++s) {
        runs[base + s].error = e.what();
        runs[base + s].error_kind = e.kind();
      }
    };
    try {
      RequireTrainingData(cell.train);
      Rng rng(DeriveSeed({config.seed, ModelHash(config.model), ei, ii, fit}));
      std::function<data::TabularDataset(std::size_t, Rng&)> sample;
      bool degenerate = false;
      double spent = 0.0;
      std::string model_json;
      std::string log_csv;
      switch (config.model) {
        case ModelKind::kPrivBayes: {
          privbayes::PrivBayesConfig pc = config.privbayes;
          pc.epsilon = epsilon;
          auto model = std::make_shared<privbayes::BayesNetModel>(
              privbayes::Fit(cell.train, pc, rng));
          spent = std::isinf(epsilon) ? 0.0 : model->budget().total;
          if (sink) model_json = model->ToJson();
          sample = [model](std::size_t m, Rng& r) { return model->Sample(m, r); };
          break;
        }
        case ModelKind::kDpWgan:
        case ModelKind::kPateGan: {
          std::shared_ptr<gan::GanModel> model;
          std::vector<gan::TrainingLogEntry> log;
          if (config.model == ModelKind::kDpWgan) {
            dpwgan::DpWganConfig wc = config.dpwgan;
            wc.budget = dp::PrivacyBudget::Approximate(epsilon, config.delta);
            auto result = dpwgan::Train(cell.train, wc, rng);
            model = std::make_shared<gan::GanModel>(std::move(result.model));
            log = std::move(result.log);
          } else {
            pategan::PateGanConfig pc = config.pategan;
            pc.budget = dp::PrivacyBudget::Approximate(epsilon, config.delta);
            auto result = pategan::Train(cell.train, pc, rng);
            model = std::make_shared<gan::GanModel>(std::move(result.model));
            log = std::move(result.log);
          }
          if (model->summary().student_saw_real_rows) {
            throw StateError("the student discriminator consumed real rows");
          }
          degenerate = model->degenerate();
          spent = model->summary().epsilon_spent;
          if (sink) {
            model_json = model->ToJson();
            std::ostringstream out;
            gan::WriteTrainingLog(log, out);
            log_csv = out.str();
          }
          sample = [model](std::size_t m, Rng& r) { return model->Generate(m, r); };
          break;
        }
      }
      RequireNoMechanisms(rng, epsilon);
      if (sink) {
        std::lock_guard<std::mutex> lock(sink_mutex);
        sink(ei, ii, static_cast<int>(fit), model_json, log_csv);
      }
      for (std::size_t s = 0; s < nk; ++s) {
        SyntheticRun& r = runs[base + s];
        r.degenerate = degenerate;
        r.epsilon_spent = spent;
        try {
          Rng srng(DeriveSeed({config.seed, ModelHash(config.model), ei, ii, fit,
                               s, HashString("sample")}));
          r.data = sample(cell.train.rows(), srng);
          RequireNoMechanisms(srng, epsilon);
        } catch (const Error& e) {
          r.error = e.what();
          r.error_kind = e.kind();
        }
      }
    } catch (const Error& e) {
      fail_all(e);
    } catch (const std::exception& e) {
      fail_all(Error("internal", e.what()));
    }
  });
  return runs;
}

namespace {

struct CellRecords {
  std::vector<Record> records;
  std::vector<Failure> failures;
};

struct RecordContext {
  std::string model;
  double epsilon;
  std::string imbalance;
  std::string setting;
};

void AddRecord(CellRecords& out, const RecordContext& ctx,
               const std::string& run_id, const std::string& group,
               const std::string& metric, double value) {
  out.records.push_back({run_id, ctx.model, ctx.epsilon, ctx.imbalance,
                         ctx.setting, group, metric, value});
}

void AddSizeRecords(CellRecords& out, const RecordContext& ctx,
                    const std::string& run_id, const PreparedCell& cell,
                    const data::TabularDataset& ds,
                    const std::vector<double>& real_sizes) {
  const std::vector<double> sizes = MeasureSizes(ds, cell.groups);
  for (std::size_t g = 0; g < cell.groups.size(); ++g) {
    const std::string name = cell.groups[g].ToString();
    AddRecord(out, ctx, run_id, name, "size", sizes[g]);
    AddRecord(out, ctx, run_id, name, "size_delta", sizes[g] - real_sizes[g]);
  }
}

void AddMetricRecords(CellRecords& out, const RecordContext& ctx,
                      const std::string& run_id, Setting setting,
                      const PreparedCell& cell,
                      const std::vector<std::vector<std::size_t>>& test_groups,
                      const classifier::LrModel& model) {
  std::vector<data::Subgroup> subgroups;
  if (setting != Setting::kClass) {
    for (std::size_t g = 0; g < cell.groups.size(); ++g) {
      subgroups.push_back({cell.groups[g], test_groups[g]});
    }
  }
  const classifier::MetricsReport report =
      classifier::Evaluate(model, cell.test, subgroups);
  if (setting == Setting::kClass) {
    for (std::size_t c = 0; c < cell.groups.size(); ++c) {
      const std::string name = cell.groups[c].ToString();
      AddRecord(out, ctx, run_id, name, "precision", report.precision[c]);
      AddRecord(out, ctx, run_id, name, "recall", report.recall[c]);
    }
  } else {
    for (const classifier::GroupAccuracy& g : report.groups) {
      AddRecord(out, ctx, run_id, g.key.ToString(), "accuracy", g.accuracy);
    }
  }
  AddRecord(out, ctx, run_id, "all", "accuracy", report.accuracy);
}

void AddFailure(CellRecords& out, const std::string& run_id,
                const std::string& stage, const Error& e) {
  out.failures.push_back({run_id, stage, e.kind(), e.what()});
}

}  // namespace

AuditReport Evaluate(const ExperimentConfig& config,
                     const std::vector<PreparedCell>& cells,
                     const std::vector<SyntheticRun>& runs, int workers) {
  config.Validate();
  const std::size_t ne = config.epsilons.size();
  const std::size_t ni = cells.size();
  const std::size_t lk = static_cast<std::size_t>(config.l) * config.k;
  if (runs.size() != ne * ni * lk) {
    throw InvalidArgumentError("synthetic runs do not match the configuration");
  }
  const std::string setting(SettingName(config.setting));
  const std::string model_name(ModelName(config.model));

  // Per imbalance cell: real group sizes, test group rows, real classifier.
  std::vector<std::vector<double>> real_sizes(ni);
  std::vector<std::vector<std::vector<std::size_t>>> test_groups(ni);
  std::vector<std::optional<classifier::LrModel>> real_models(ni);
  std::vector<CellRecords> real_errors(ni);
  for (std::size_t ii = 0; ii < ni; ++ii) {
    const PreparedCell& cell = cells[ii];
    RequireTrainingData(cell.train);
    real_sizes[ii] = MeasureSizes(cell.train, cell.groups);
    for (const auto& key : cell.groups) {
      test_groups[ii].push_back(MatchRows(cell.test, key));
    }
    if (config.classifiers) {
      try {
        real_models[ii] = classifier::TrainLr(cell.train, config.regularization);
      } catch (const Error& e) {
        AddFailure(real_errors[ii], "real/i" + std::to_string(ii), "real_classifier", e);
      }
    }
  }

  // Slots: for each (imbalance, epsilon): lk DP classifiers then lk
  // synthetic runs.
  const std::size_t per_cell = 2 * lk;
  std::vector<CellRecords> slots(ni * ne * per_cell);
  ParallelFor(slots.size(), workers, [&](std::size_t slot) {
    const std::size_t j = slot % per_cell;
    const std::size_t ei = (slot / per_cell) % ne;
    const std::size_t ii = slot / (per_cell * ne);
    const PreparedCell& cell = cells[ii];
    const double epsilon = config.epsilons[ei];
    CellRecords& out = slots[slot];
    const std::string imbalance = ImbalanceLabel(cell.imbalance);
    if (j < lk) {
      if (!config.classifiers) return;
      const std::string run_id = "dplr/e" + std::to_string(ei) + "/i" +
                                 std::to_string(ii) + "/r" + std::to_string(j);
      const RecordContext ctx{"dplr", epsilon, imbalance, setting};
      try {
        RequireTrainingData(cell.train);
        Rng rng(DeriveSeed({config.seed, HashString("dplr"), ei, ii, j}));
        const classifier::LrModel m = classifier::TrainDpLr(
            cell.train, epsilon, config.regularization, rng);
        RequireNoMechanisms(rng, epsilon);
        AddMetricRecords(out, ctx, run_id, config.setting, cell, test_groups[ii], m);
      } catch (const Error& e) {
        AddFailure(out, run_id, "dp_classifier", e);
      }
      return;
    }
    const std::size_t r = j - lk;
    const SyntheticRun& run = runs[(ei * ni + ii) * lk + r];
    if (run.epsilon_index != ei || run.imbalance_index != ii) {
      throw StateError("synthetic runs are out of order");
    }
    const std::string run_id = RunId(config.model, run);
    const RecordContext ctx{model_name, epsilon, imbalance, setting};
    if (!run.error.empty() || !run.data) {
      out.failures.push_back({run_id, "generate",
                              run.error_kind.empty() ? "internal" : run.error_kind,
                              run.error});
      return;
    }
    AddRecord(out, ctx, run_id, "all", "degenerate", run.degenerate ? 1.0 : 0.0);
    AddRecord(out, ctx, run_id, "all", "epsilon_spent", run.epsilon_spent);
    AddSizeRecords(out, ctx, run_id, cell, *run.data, real_sizes[ii]);
    if (!config.classifiers) return;
    try {
      RequireTrainingData(*run.data);
      const classifier::LrModel m =
          classifier::TrainLr(*run.data, config.regularization);
      AddMetricRecords(out, ctx, run_id, config.setting, cell, test_groups[ii], m);
    } catch (const Error& e) {
      AddFailure(out, run_id, "synth_classifier", e);
    }
  });

  AuditReport report;
  for (std::size_t ii = 0; ii < ni; ++ii) {
    const PreparedCell& cell = cells[ii];
    const std::string imbalance = ImbalanceLabel(cell.imbalance);
    for (std::size_t ei = 0; ei < ne; ++ei) {
      CellRecords real;
      const RecordContext ctx{"real", config.epsilons[ei], imbalance, setting};
      const std::string run_id = "real/i" + std::to_string(ii);
      AddSizeRecords(real, ctx, run_id, cell, cell.train, real_sizes[ii]);
      if (real_models[ii]) {
        AddMetricRecords(real, ctx, run_id, config.setting, cell, test_groups[ii],
                         *real_models[ii]);
      } else if (ei == 0) {
        real.failures = real_errors[ii].failures;
      }
      for (CellRecords* part : {&real}) {
        report.records.insert(report.records.end(), part->records.begin(),
                              part->records.end());
        report.failures.insert(report.failures.end(), part->failures.begin(),
                               part->failures.end());
      }
      for (std::size_t j = 0; j < per_cell; ++j) {
        CellRecords& s = slots[(ii * ne + ei) * per_cell + j];
        report.records.insert(report.records.end(), s.records.begin(),
                              s.records.end());
        report.failures.insert(report.failures.end(), s.failures.begin(),
                               s.failures.end());
      }
    }
  }
  return report;
}

AuditReport RunExperiment(const ExperimentConfig& config, int workers) {
  config.Validate();
  if (config.data_path.empty() || config.schema_path.empty()) {
    throw InvalidArgumentError("config needs data and schema paths");
  }
  auto schema = std::make_shared<const data::Schema>(
      data::Schema::Load(config.schema_path));
  const data::TabularDataset full = data::LoadCsv(config.data_path, schema);
  std::optional<data::TabularDataset> test;
  if (!config.test_path.empty()) {
    test = data::LoadCsv(config.test_path, schema, data::Provenance::kTest);
  }
  const std::vector<PreparedCell> cells = Prepare(config, full, test);
  const std::vector<SyntheticRun> runs = Generate(config, cells, workers);
  return Evaluate(config, cells, runs, workers);
}

std::vector<Aggregate> AggregateRecords(const std::vector<Record>& records) {
  using Key = std::tuple<std::string, double, std::string, std::string,
                         std::string, std::string>;
  std::map<Key, std::size_t> index;
  std::vector<Aggregate> out;
  std::vector<std::vector<double>> values;
  for (const Record& r : records) {
    const Key key{r.model, r.epsilon, r.imbalance, r.setting, r.group, r.metric};
    auto [it, inserted] = index.emplace(key, out.size());
    if (inserted) {
      Aggregate a;
      a.model = r.model;
      a.epsilon = r.epsilon;
      a.imbalance = r.imbalance;
      a.setting = r.setting;
      a.group = r.group;
      a.metric = r.metric;
      out.push_back(std::move(a));
      values.emplace_back();
    }
    if (std::isnan(r.value)) {
      ++out[it->second].skipped;
    } else {
      values[it->second].push_back(r.value);
    }
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::vector<double>& v = values[i];
    out[i].count = v.size();
    if (v.empty()) continue;
    double sum = 0.0;
    for (double x : v) sum += x;
    const double mean = sum / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    out[i].mean = mean;
    out[i].stddev =
        v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
  }
  return out;
}

void WriteRecordsCsv(const std::vector<Record>& records, std::ostream& out) {
  out << "run_id,model,epsilon,imbalance,setting,group,metric,value\n";
  for (const Record& r : records) {
    out << r.run_id << ',' << r.model << ',' << FormatDouble(r.epsilon) << ','
        << r.imbalance << ',' << r.setting << ',' << r.group << ',' << r.metric
        << ',' << FormatDouble(r.value) << '\n';
  }
}

std::vector<Record> ReadRecordsCsv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) ||
      line != "run_id,model,epsilon,imbalance,setting,group,metric,value") {
    throw DataError("records CSV has an unexpected header");
  }
  std::vector<Record> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 8) {
      throw DataError("records CSV line " + std::to_string(lineno) +
                      " has " + std::to_string(f.size()) + " fields");
    }
    out.push_back({f[0], f[1], ParseDouble(f[2]), f[3], f[4], f[5], f[6],
                   ParseDouble(f[7])});
  }
  return out;
}

void WriteAggregatesCsv(const std::vector<Aggregate>& aggregates,
                        std::ostream& out) {
  out << "model,epsilon,imbalance,setting,group,metric,count,skipped,mean,std\n";
  for (const Aggregate& a : aggregates) {
    out << a.model << ',' << FormatDouble(a.epsilon) << ',' << a.imbalance << ','
        << a.setting << ',' << a.group << ',' << a.metric << ',' << a.count << ','
        << a.skipped << ',' << FormatDouble(a.mean) << ','
        << FormatDouble(a.stddev) << '\n';
  }
}

void WriteFailuresCsv(const std::vector<Failure>& failures, std::ostream& out) {
  out << "run_id,stage,kind,message\n";
  for (const Failure& f : failures) {
    std::string msg = f.message;
    std::replace(msg.begin(), msg.end(), ',', ';');
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    out << f.run_id << ',' << f.stage << ',' << f.kind << ',' << msg << '\n';
  }
}

std::vector<Failure> ReadFailuresCsv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "run_id,stage,kind,message") {
    throw DataError("failures CSV has an unexpected header");
  }
  std::vector<Failure> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    Failure f;
    std::stringstream ss(line);
    std::getline(ss, f.run_id, ',');
    std::getline(ss, f.stage, ',');
    std::getline(ss, f.kind, ',');
    std::getline(ss, f.message);
    out.push_back(std::move(f));
  }
  return out;
}

namespace {

std::string XmlEscape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '&':
        out += "&amp;";
        break;
      case '"':
        out += "&quot;";
        break;
      default:
        out += c;
    }
  }
  return out;
}

std::string Fixed(double v) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(2);
  s << v;
  return s.str();
}

void WriteFile(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << content;
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace

std::string RenderChart(const std::vector<Aggregate>& aggregates,
                        std::string_view imbalance, std::string_view metric) {
  std::vector<const Aggregate*> rows;
  for (const Aggregate& a : aggregates) {
    if (a.imbalance == imbalance && a.metric == metric && a.count > 0) {
      rows.push_back(&a);
    }
  }
  if (rows.empty()) return {};
  std::vector<double> eps;
  for (const Aggregate* a : rows) eps.push_back(a->epsilon);
  std::sort(eps.begin(), eps.end());
  eps.erase(std::unique(eps.begin(), eps.end()), eps.end());
  std::vector<std::string> series;
  std::map<std::string, std::map<double, const Aggregate*>> points;
  double lo = kInf;
  double hi = -kInf;
  for (const Aggregate* a : rows) {
    const std::string name = a->model + " " + a->group;
    if (!points.contains(name)) series.push_back(name);
    points[name][a->epsilon] = a;
    lo = std::min(lo, a->mean - a->stddev);
    hi = std::max(hi, a->mean + a->stddev);
  }
  if (hi - lo < 1e-9) {
    lo -= 0.5;
    hi += 0.5;
  }
  constexpr double kWidth = 720, kHeight = 420, kLeft = 60, kRight = 220,
                   kTop = 30, kBottom = 50;
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  auto x_of = [&](double e) {
    const auto i = std::lower_bound(eps.begin(), eps.end(), e) - eps.begin();
    return eps.size() == 1
               ? kLeft + plot_w / 2
               : kLeft + plot_w * static_cast<double>(i) /
                             static_cast<double>(eps.size() - 1);
  };
  auto y_of = [&](double v) { return kTop + plot_h * (hi - v) / (hi - lo); };
  static constexpr const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c",
                                             "#d62728", "#9467bd", "#8c564b",
                                             "#e377c2", "#7f7f7f", "#bcbd22",
                                             "#17becf"};
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
      << "\" height=\"" << kHeight << "\" font-family=\"sans-serif\" "
      << "font-size=\"11\">\n";
  svg << "<text x=\"" << kLeft << "\" y=\"18\" font-size=\"13\">"
      << XmlEscape(metric) << " vs epsilon (imbalance " << XmlEscape(imbalance)
      << ")</text>\n";
  svg << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << plot_w
      << "\" height=\"" << plot_h << "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (double e : eps) {
    svg << "<text x=\"" << Fixed(x_of(e)) << "\" y=\"" << kTop + plot_h + 18
        << "\" text-anchor=\"middle\">" << FormatDouble(e) << "</text>\n";
  }
  for (int t = 0; t <= 4; ++t) {
    const double v = lo + (hi - lo) * t / 4.0;
    svg << "<text x=\"" << kLeft - 6 << "\" y=\"" << Fixed(y_of(v) + 4)
        << "\" text-anchor=\"end\">" << Fixed(v) << "</text>\n";
  }
  svg << "<text x=\"" << kLeft + plot_w / 2 << "\" y=\"" << kHeight - 10
      << "\" text-anchor=\"middle\">epsilon</text>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = kPalette[s % std::size(kPalette)];
    const auto& pts = points[series[s]];
    std::string upper;
    std::string lower;
    std::string line;
    for (const auto& [e, a] : pts) {
      const double x = x_of(e);
      upper += Fixed(x) + "," + Fixed(y_of(a->mean + a->stddev)) + " ";
      lower = Fixed(x) + "," + Fixed(y_of(a->mean - a->stddev)) + " " + lower;
      line += Fixed(x) + "," + Fixed(y_of(a->mean)) + " ";
    }
    svg << "<polygon points=\"" << upper << lower << "\" fill=\"" << color
        << "\" fill-opacity=\"0.15\" stroke=\"none\"/>\n";
    svg << "<polyline points=\"" << line << "\" fill=\"none\" stroke=\""
        << color << "\" stroke-width=\"2\"/>\n";
    const double ly = kTop + 14.0 * static_cast<double>(s) + 6;
    svg << "<rect x=\"" << kWidth - kRight + 12 << "\" y=\"" << ly - 8
        << "\" width=\"10\" height=\"10\" fill=\"" << color << "\"/>\n";
    svg << "<text x=\"" << kWidth - kRight + 28 << "\" y=\"" << ly + 1 << "\">"
        << XmlEscape(series[s]) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

void EmitReport(const AuditReport& report, const ExperimentConfig& config,
                const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  const std::vector<Aggregate> aggregates = AggregateRecords(report.records);
  std::ostringstream records;
  WriteRecordsCsv(report.records, records);
  WriteFile(out_dir / "records.csv", records.str());
  std::ostringstream agg;
  WriteAggregatesCsv(aggregates, agg);
  WriteFile(out_dir / "aggregates.csv", agg.str());
  std::ostringstream failures;
  WriteFailuresCsv(report.failures, failures);
  WriteFile(out_dir / "failures.csv", failures.str());
  WriteFile(out_dir / "config.json", config.ToJson() + "\n");

  std::vector<std::string> imbalances;
  for (const Aggregate& a : aggregates) {
    if (std::find(imbalances.begin(), imbalances.end(), a.imbalance) ==
        imbalances.end()) {
      imbalances.push_back(a.imbalance);
    }
  }
  for (const std::string& imb : imbalances) {
    for (const char* metric : {"size", "precision", "recall", "accuracy"}) {
      const std::string svg = RenderChart(aggregates, imb, metric);
      if (svg.empty()) continue;
      WriteFile(out_dir / ("chart_" + std::string(metric) + "_imbalance_" + imb +
                           ".svg"),
                svg);
    }
  }
}

}  // namespace dpsynth::harness
