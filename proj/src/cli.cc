// Copyright 2026 The acomm Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "acomm/cli.h"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "acomm/acwt.h"
#include "acomm/costmodel.h"
#include "acomm/digest.h"
#include "acomm/error.h"
#include "acomm/mapper.h"
#include "acomm/model.h"
#include "acomm/protocols.h"
#include "acomm/tasks.h"
#include "json.hpp"

namespace acomm {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

#ifndef ACOMM_VERSION
#define ACOMM_VERSION "0.0.0"
#endif

// Partial failure after outputs were written.
struct PartialFailure {
  int failures = 0;
};

void CheckWritable(const std::string& path, bool force) {
  if (path.empty()) throw InvalidArgument("an output path is required (--out)");
  if (fs::exists(path) && !force) {
    throw InvalidArgument(path + " exists; pass --force to overwrite");
  }
}

void CheckReadable(const std::string& path, const char* what) {
  if (path.empty()) throw InvalidArgument(std::string("missing ") + what);
  if (!fs::is_regular_file(path)) throw InvalidArgument(std::string(what) + " not found: " + path);
}

std::string FileDigest(const std::string& path) { return Sha256Hex(acwt::ReadFileBytes(path)); }

// Provenance block written next to (or into) every artifact.
json MakeMeta(const std::string& command, const json& config) {
  return {{"tool", "acomm"},
          {"version", ACOMM_VERSION},
          {"command", command},
          {"config", config},
          {"config_hash", Sha256Hex(config.dump())}};
}

void WriteSidecar(const std::string& path, const json& meta) {
  acwt::WriteFileAtomic(path + ".meta.json", DumpJson(meta, 2) + "\n");
}

json ReportToJson(const EvalReport& r) {
  return {{"n", r.n},           {"accuracy", r.accuracy},
          {"ci_low", r.ci_low}, {"ci_high", r.ci_high},
          {"bootstrap_iters", r.bootstrap_iters}, {"level", r.level},
          {"seed", r.seed}};
}

std::shared_ptr<const Model> LoadShared(const std::string& path, const char* what) {
  CheckReadable(path, what);
  return std::make_shared<const Model>(LoadModel(path));
}

// ---------------------------------------------------------------- gen-tasks

struct GenTasksArgs {
  std::string game = "countries";
  int n = 0;  // 0 picks the game's default size
  std::uint64_t seed = 0;
  std::string out;
  bool force = false;
};

int CmdGenTasks(const GenTasksArgs& a, std::ostream& out) {
  const Game game = ParseGame(a.game);
  const int n = a.n > 0 ? a.n : (game == Game::kCountries ? 100 : 70);
  CheckWritable(a.out, a.force);
  const auto tasks = game == Game::kCountries ? GenCountries(n, a.seed) : GenTipSheets(n, a.seed);
  const json config = {{"game", ToString(game)}, {"n", n}, {"seed", a.seed}};
  acwt::WriteFileAtomic(a.out, TasksToJsonl(tasks));
  WriteSidecar(a.out, MakeMeta("gen-tasks", config));
  out << "wrote " << tasks.size() << " tasks to " << a.out << "\n";
  return kExitOk;
}

// --------------------------------------------------------------- init-model

struct InitModelArgs {
  std::string preset = "toy";
  std::optional<int> layers, heads, key_size, ffn_size, model_dim, vocab_size, max_seq_len;
  std::uint64_t seed = 0;
  std::string out;
  bool force = false;
};

int CmdInitModel(const InitModelArgs& a, std::ostream& out) {
  if (a.preset != "toy") throw InvalidArgument("unknown model preset '" + a.preset + "'");
  ModelConfig c = ToyConfig();
  if (a.layers) c.n_layers = *a.layers;
  if (a.heads) c.n_heads = *a.heads;
  if (a.key_size) c.key_size = *a.key_size;
  if (a.ffn_size) c.ffn_size = *a.ffn_size;
  if (a.model_dim) c.model_dim = *a.model_dim;
  if (a.vocab_size) c.vocab_size = *a.vocab_size;
  if (a.max_seq_len) c.max_seq_len = *a.max_seq_len;
  c.Validate();
  CheckWritable(a.out, a.force);
  const Model model = InitRandomModel(c, a.seed);
  const json config = {{"n_layers", c.n_layers}, {"n_heads", c.n_heads},
                       {"key_size", c.key_size}, {"ffn_size", c.ffn_size},
                       {"model_dim", c.model_dim}, {"vocab_size", c.vocab_size},
                       {"max_seq_len", c.max_seq_len}, {"seed", a.seed}};
  SaveModel(a.out, model, MakeMeta("init-model", config).dump());
  out << "wrote model " << ModelDigest(model) << " to " << a.out << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- train-map

struct TrainMapArgs {
  std::string model_a, model_b, corpus;
  std::string corpus_format = "text";
  int k = 26, j = 26;
  TrainOptions train;
  std::string out, report;
  bool force = false;
};

std::vector<std::string> ReadCorpus(const std::string& path, const std::string& format) {
  CheckReadable(path, "corpus");
  const std::string text = acwt::ReadFileBytes(path);
  std::vector<std::string> sentences;
  if (format == "tasks") {
    for (const TaskInstance& t : TasksFromJsonl(text)) {
      sentences.push_back(t.prompt_a);
      sentences.push_back(t.prompt_b);
    }
  } else if (format == "text") {
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) sentences.push_back(line);
    }
  } else {
    throw InvalidArgument("unknown corpus format '" + format + "' (text|tasks)");
  }
  if (sentences.empty()) throw InvalidArgument("corpus is empty: " + path);
  return sentences;
}

int CmdTrainMap(const TrainMapArgs& a, std::ostream& out) {
  const auto model_a = LoadShared(a.model_a, "model A");
  const auto model_b = LoadShared(a.model_b, "model B");
  if (a.k < 0 || a.k > model_a->config.n_layers) {
    throw InvalidArgument("k=" + std::to_string(a.k) + " outside model A's depth");
  }
  if (a.j < 0 || a.j > model_b->config.n_layers) {
    throw InvalidArgument("j=" + std::to_string(a.j) + " outside model B's depth");
  }
  if (a.train.epochs < 0 || a.train.batch_size < 1 || !(a.train.learning_rate > 0)) {
    throw InvalidArgument("epochs must be >= 0, batch >= 1 and lr > 0");
  }
  const std::vector<std::string> sentences = ReadCorpus(a.corpus, a.corpus_format);
  CheckWritable(a.out, a.force);
  const std::string report_path = a.report.empty() ? a.out + ".report.json" : a.report;
  CheckWritable(report_path, a.force);

  const PairDataset data = CollectPairs(*model_a, *model_b, sentences, a.k, a.j);
  const TrainResult result = TrainMap(data, a.train);
  MapFile file{result.map, ModelDigest(*model_a), ModelDigest(*model_b), a.k, a.j};
  const json config = {{"model_a_digest", file.model_a_digest},
                       {"model_b_digest", file.model_b_digest},
                       {"corpus_sha256", FileDigest(a.corpus)},
                       {"corpus_format", a.corpus_format},
                       {"k", a.k}, {"j", a.j},
                       {"epochs", a.train.epochs}, {"batch_size", a.train.batch_size},
                       {"learning_rate", a.train.learning_rate}, {"seed", a.train.seed}};
  const json meta = MakeMeta("train-map", config);
  SaveMap(a.out, file, meta.dump());
  const json report = {{"epoch_losses", result.report.epoch_losses},
                       {"final_loss", result.report.final_loss},
                       {"n", result.report.n},
                       {"dim_in", result.report.dim_in},
                       {"dim_out", result.report.dim_out},
                       {"meta", meta}};
  acwt::WriteFileAtomic(report_path, DumpJson(report, 2) + "\n");
  out << "trained map on " << data.size() << " pairs, final loss " << result.report.final_loss
      << "\n";
  return kExitOk;
}

// --------------------------------------------------------------- run, sweep

struct RunArgs {
  std::string protocol = "silent";
  std::string variant = "base";
  std::string model_a, model_b, tasks, map;
  bool scripted = false;
  int k = 26, j = 26;
  std::string f = "replace";
  std::string scope = "last";
  std::string strategy = "greedy";
  double top_p = 0.9;
  double temperature = 1.0;
  int max_new_tokens = 32;
  int message_tokens = 32;
  int rounds = 2;
  bool strict = false;
  std::uint64_t seed = 0;
  std::string out;
  bool force = false;
  int jobs = 1;
};

// Everything a batch of protocol runs needs, loaded and validated up front.
struct Session {
  ProtocolKind kind = ProtocolKind::kSilent;
  ProtocolOptions options;
  std::vector<TaskInstance> tasks;
  std::unique_ptr<Agent> a, b;
  json config;
  std::string config_hash;
};

void CheckLayers(const Session& s, int k, int j) {
  const Agent& sender = s.options.variant == AcVariant::kSelf ? *s.b : *s.a;
  if (sender.model() && (k < 0 || k > sender.model()->config.n_layers)) {
    throw InvalidArgument("k=" + std::to_string(k) + " outside model A's depth " +
                          std::to_string(sender.model()->config.n_layers));
  }
  if (s.b->model() && (j < 0 || j > s.b->model()->config.n_layers)) {
    throw InvalidArgument("j=" + std::to_string(j) + " outside model B's depth " +
                          std::to_string(s.b->model()->config.n_layers));
  }
}

Session OpenSession(const RunArgs& a, const std::string& command) {
  Session s;
  s.kind = ParseProtocolKind(a.protocol);
  ProtocolOptions& opt = s.options;
  opt.seed = a.seed;
  opt.message_tokens = a.message_tokens;
  opt.rounds = a.rounds;
  opt.strict = a.strict;
  opt.variant = ParseAcVariant(a.variant);
  opt.graft.source_layer = a.k;
  opt.graft.target_layer = a.j;
  opt.graft.combine.kind = ParseCombineKind(a.f);
  opt.graft.combine.scope = ParseGraftScope(a.scope);
  if (a.message_tokens < 0) throw InvalidArgument("--message-tokens must be >= 0");
  if (a.rounds < 1) throw InvalidArgument("--rounds must be >= 1");
  if (a.jobs < 1) throw InvalidArgument("--jobs must be >= 1");

  DecodingConfig dc;
  if (a.strategy == "greedy") {
    dc.strategy = Strategy::kGreedy;
  } else if (a.strategy == "nucleus") {
    dc.strategy = Strategy::kNucleus;
  } else {
    throw InvalidArgument("unknown strategy '" + a.strategy + "' (greedy|nucleus)");
  }
  if (!(a.top_p > 0.0 && a.top_p <= 1.0)) throw InvalidArgument("--top-p must be in (0, 1]");
  if (!(a.temperature > 0.0)) throw InvalidArgument("--temperature must be > 0");
  if (a.max_new_tokens < 0) throw InvalidArgument("--max-new-tokens must be >= 0");
  dc.top_p = a.top_p;
  dc.temperature = a.temperature;
  dc.max_new_tokens = a.max_new_tokens;

  CheckReadable(a.tasks, "task file");
  s.tasks = TasksFromJsonl(acwt::ReadFileBytes(a.tasks));
  if (s.tasks.empty()) throw InvalidArgument("task file has no tasks: " + a.tasks);

  json config = {{"protocol", ToString(s.kind)},
                 {"variant", ToString(opt.variant)},
                 {"tasks_sha256", FileDigest(a.tasks)},
                 {"scripted", a.scripted},
                 {"f", ToString(opt.graft.combine.kind)},
                 {"scope", ToString(opt.graft.combine.scope)},
                 {"strategy", a.strategy},
                 {"top_p", a.top_p},
                 {"temperature", a.temperature},
                 {"max_new_tokens", a.max_new_tokens},
                 {"message_tokens", a.message_tokens},
                 {"rounds", a.rounds},
                 {"strict", a.strict},
                 {"seed", a.seed},
                 {"templates_sha256", TemplatesDigest()}};

  const bool ac_like = s.kind == ProtocolKind::kAc || command == "sweep";
  if (a.scripted) {
    s.a = std::make_unique<ScriptedAgent>(ScriptedAgent::Forwarder("A", s.tasks));
    s.b = std::make_unique<ScriptedAgent>(ScriptedAgent::Oracle("B", s.tasks));
  } else {
    const auto model_b = LoadShared(a.model_b, "model B (--model-b)");
    config["model_b_digest"] = ModelDigest(*model_b);
    const bool needs_a = s.kind == ProtocolKind::kNl || s.kind == ProtocolKind::kNld ||
                         (ac_like && opt.variant != AcVariant::kSelf);
    std::shared_ptr<const Model> model_a = model_b;
    if (needs_a) {
      model_a = LoadShared(a.model_a, "model A (--model-a)");
      config["model_a_digest"] = ModelDigest(*model_a);
    }
    s.a = std::make_unique<ModelAgent>("A", model_a, dc);
    s.b = std::make_unique<ModelAgent>("B", model_b, dc);
  }

  if (ac_like) {
    config["k"] = a.k;
    config["j"] = a.j;
    if (!a.map.empty()) {
      CheckReadable(a.map, "map file");
      const MapFile map = LoadMap(a.map);
      if (!a.scripted) CheckMapPairing(map, *s.a->model(), *s.b->model());
      if (command == "run" && (map.source_layer != a.k || map.target_layer != a.j)) {
        throw InvalidArgument("map was trained for k=" + std::to_string(map.source_layer) +
                              ", j=" + std::to_string(map.target_layer));
      }
      opt.graft.combine.pre_map = map.map;
      config["map_sha256"] = FileDigest(a.map);
    }
    opt.graft.combine.Validate();
    if (command == "run") CheckLayers(s, a.k, a.j);
  }
  s.config = std::move(config);
  s.config_hash = Sha256Hex(s.config.dump());
  return s;
}

struct BatchResult {
  std::vector<std::string> lines;
  std::vector<double> scores;  // failed runs score 0
  int failures = 0;
};

// Runs every task, in parallel when jobs > 1; lines stay in task order.
BatchResult RunBatch(const Session& s, const ProtocolOptions& opt, int jobs) {
  const std::size_t n = s.tasks.size();
  BatchResult r;
  r.lines.resize(n);
  r.scores.assign(n, 0.0);
  std::vector<char> failed(n, 0);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      ProtocolOptions o = opt;
      o.seed = DeriveSeed(opt.seed, i);
      json line;
      try {
        const ProtocolRun run = RunProtocol(s.kind, *s.a, *s.b, s.tasks[i], o);
        line = ToJson(run);
        r.scores[i] = run.score;
      } catch (const std::exception& e) {
        line = {{"task_id", s.tasks[i].id}, {"protocol", ToString(s.kind)},
                {"seed", o.seed}, {"error", e.what()}};
        failed[i] = 1;
      }
      line["config_hash"] = s.config_hash;
      r.lines[i] = DumpJson(line);
    }
  };
  const int threads = std::min<int>(jobs, static_cast<int>(n));
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  r.failures = static_cast<int>(std::count(failed.begin(), failed.end(), 1));
  return r;
}

std::string JoinLines(const std::vector<std::string>& lines) {
  std::string text;
  for (const std::string& l : lines) text += l + "\n";
  return text;
}

int CmdRun(const RunArgs& a, std::ostream& out) {
  const Session s = OpenSession(a, "run");
  CheckWritable(a.out, a.force);
  const BatchResult r = RunBatch(s, s.options, a.jobs);
  acwt::WriteFileAtomic(a.out, JoinLines(r.lines));
  json meta = MakeMeta("run", s.config);
  WriteSidecar(a.out, meta);
  json summary = ReportToJson(BootstrapCi(r.scores, 1000, 0.95, a.seed));
  summary["failures"] = r.failures;
  summary["protocol"] = ToString(s.kind);
  out << DumpJson(summary) << "\n";
  if (r.failures > 0) throw PartialFailure{r.failures};
  return kExitOk;
}

struct SweepArgs {
  RunArgs run;
  std::vector<int> k_values, j_values;
  std::string runs_out;
};

int CmdSweep(const SweepArgs& a, std::ostream& out) {
  RunArgs base = a.run;
  base.protocol = "ac";
  Session s = OpenSession(base, "sweep");
  if (a.k_values.empty() || a.j_values.empty()) throw InvalidArgument("empty k or j range");
  for (int k : a.k_values)
    for (int j : a.j_values) CheckLayers(s, k, j);
  CheckWritable(a.run.out, a.run.force);
  const std::string runs_path = a.runs_out.empty() ? a.run.out + ".runs.jsonl" : a.runs_out;
  CheckWritable(runs_path, a.run.force);
  s.config["k_values"] = a.k_values;
  s.config["j_values"] = a.j_values;
  s.config.erase("k");
  s.config.erase("j");
  s.config_hash = Sha256Hex(s.config.dump());

  std::vector<std::string> lines;
  json accuracy = json::array();
  int failures = 0;
  for (int k : a.k_values) {
    json row = json::array();
    for (int j : a.j_values) {
      ProtocolOptions opt = s.options;
      opt.graft.source_layer = k;
      opt.graft.target_layer = j;
      const BatchResult r = RunBatch(s, opt, a.run.jobs);
      double total = 0.0;
      for (double v : r.scores) total += v;
      row.push_back(total / static_cast<double>(r.scores.size()));
      lines.insert(lines.end(), r.lines.begin(), r.lines.end());
      failures += r.failures;
    }
    accuracy.push_back(std::move(row));
  }
  const json matrix = {{"k_values", a.k_values}, {"j_values", a.j_values},
                       {"accuracy", accuracy},   {"failures", failures},
                       {"meta", MakeMeta("sweep", s.config)}};
  acwt::WriteFileAtomic(runs_path, JoinLines(lines));
  acwt::WriteFileAtomic(a.run.out, DumpJson(matrix, 2) + "\n");
  out << "wrote " << a.k_values.size() << "x" << a.j_values.size() << " accuracy matrix to "
      << a.run.out << "\n";
  if (failures > 0) throw PartialFailure{failures};
  return kExitOk;
}

// --------------------------------------------------------------------- cost

struct CostArgs {
  std::string preset = "toy";
  std::string reference = "llama1b";
  std::optional<std::uint64_t> L, H, K, F, D, V;
  std::uint64_t P = 256, M = 256, T = 64;
  std::optional<std::uint64_t> k;
  bool map_used = false;
  std::uint64_t dim_a = 0, dim_b = 0;
  std::string out;
  bool force = false;
};

int CmdCost(const CostArgs& a, std::ostream& out) {
  const auto preset = ArchitecturePreset(a.preset);
  if (!preset) throw InvalidArgument("unknown preset '" + a.preset + "'");
  const auto reference = ArchitecturePreset(a.reference);
  if (!reference) throw InvalidArgument("unknown reference preset '" + a.reference + "'");
  CostParams p;
  p.arch = *preset;
  if (a.L) p.arch.n_layers = *a.L;
  if (a.H) p.arch.n_heads = *a.H;
  if (a.K) p.arch.key_size = *a.K;
  if (a.F) p.arch.ffn_size = *a.F;
  if (a.D) p.arch.model_dim = *a.D;
  if (a.V) p.arch.vocab_size = *a.V;
  p.prompt_tokens = a.P;
  p.message_tokens = a.M;
  p.output_tokens = a.T;
  p.graft_layer = a.k.value_or(std::min<std::uint64_t>(26, p.arch.n_layers));
  p.map_used = a.map_used;
  p.dim_a = a.map_used && a.dim_a == 0 ? p.arch.model_dim : a.dim_a;
  p.dim_b = a.map_used && a.dim_b == 0 ? p.arch.model_dim : a.dim_b;
  p.Validate();
  if (!a.out.empty()) CheckWritable(a.out, a.force);

  const CostReport r = MakeCostReport(p, *reference);
  auto opt_real = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  const json report = {
      {"params", {{"L", p.arch.n_layers}, {"H", p.arch.n_heads}, {"K", p.arch.key_size},
                  {"F", p.arch.ffn_size}, {"D", p.arch.model_dim}, {"V", p.arch.vocab_size},
                  {"P", p.prompt_tokens}, {"M", p.message_tokens}, {"T", p.output_tokens},
                  {"k", p.graft_layer}, {"map_used", p.map_used},
                  {"dim_a", p.dim_a}, {"dim_b", p.dim_b}}},
      {"preset", a.preset},
      {"reference", a.reference},
      {"nl_flops", FlopsToJson(r.nl_flops)},
      {"ac_flops", FlopsToJson(r.ac_flops)},
      {"ratio", opt_real(r.ratio)},
      {"ratio_defined", r.ratio.has_value()},
      {"normalized_nl", opt_real(r.normalized_nl)},
      {"normalized_ac", opt_real(r.normalized_ac)}};
  if (a.out.empty()) {
    out << DumpJson(report, 2) << "\n";
  } else {
    acwt::WriteFileAtomic(a.out, DumpJson(report, 2) + "\n");
  }
  return kExitOk;
}

// ------------------------------------------------------------------- report

struct ReportArgs {
  std::string results;
  int iters = 1000;
  double level = 0.95;
  std::uint64_t seed = 0;
  std::string out;
  bool force = false;
};

int CmdReport(const ReportArgs& a, std::ostream& out) {
  CheckReadable(a.results, "results file");
  if (a.iters < 1) throw InvalidArgument("--iters must be >= 1");
  if (!(a.level > 0.0 && a.level < 1.0)) throw InvalidArgument("--level must be in (0, 1)");
  if (!a.out.empty()) CheckWritable(a.out, a.force);
  std::istringstream in(acwt::ReadFileBytes(a.results));
  std::vector<double> scores;
  int failures = 0, line_no = 0;
  std::set<std::string> hashes;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw FormatError("results line " + std::to_string(line_no) + ": " + e.what());
    }
    if (j.contains("config_hash")) hashes.insert(j["config_hash"].get<std::string>());
    if (j.contains("error")) {
      ++failures;
      scores.push_back(0.0);
      continue;
    }
    if (!j.contains("score") || !j["score"].is_number()) {
      throw FormatError("results line " + std::to_string(line_no) + " has no score");
    }
    scores.push_back(j["score"].get<double>());
  }
  if (scores.empty()) throw InvalidArgument("results file is empty: " + a.results);
  json report = ReportToJson(BootstrapCi(scores, a.iters, a.level, a.seed));
  report["failures"] = failures;
  report["results_sha256"] = FileDigest(a.results);
  report["config_hashes"] = hashes;
  report["tool"] = "acomm";
  report["version"] = ACOMM_VERSION;
  const std::string text = DumpJson(report, 2) + "\n";
  if (a.out.empty()) {
    out << text;
  } else {
    acwt::WriteFileAtomic(a.out, text);
    out << text;
  }
  return kExitOk;
}

// ------------------------------------------------------------------ wiring

void AddRunOptions(CLI::App* cmd, RunArgs& r) {
  cmd->add_option("--protocol", r.protocol, "silent|skyline|nl|nld|ac")->capture_default_str();
  cmd->add_option("--variant", r.variant, "AC variant: base|cot|self")->capture_default_str();
  cmd->add_option("--model-a", r.model_a, "ACWT weights of the sender A");
  cmd->add_option("--model-b", r.model_b, "ACWT weights of the receiver B");
  cmd->add_option("--tasks", r.tasks, "task JSONL file")->required();
  cmd->add_option("--map", r.map, "ACWT map file applied to A's activation before f");
  cmd->add_flag("--scripted", r.scripted,
                "use scripted agents (A forwards x_A, B answers when it sees x_A)");
  cmd->add_option("--k", r.k, "source layer on A")->capture_default_str();
  cmd->add_option("--j", r.j, "target layer on B")->capture_default_str();
  cmd->add_option("--f", r.f, "combine function: sum|mean|replace")->capture_default_str();
  cmd->add_option("--scope", r.scope, "graft scope: last|all")->capture_default_str();
  cmd->add_option("--strategy", r.strategy, "greedy|nucleus")->capture_default_str();
  cmd->add_option("--top-p", r.top_p, "nucleus mass")->capture_default_str();
  cmd->add_option("--temperature", r.temperature)->capture_default_str();
  cmd->add_option("--max-new-tokens", r.max_new_tokens)->capture_default_str();
  cmd->add_option("--message-tokens", r.message_tokens, "NL message budget M")
      ->capture_default_str();
  cmd->add_option("--rounds", r.rounds, "debate rounds")->capture_default_str();
  cmd->add_flag("--strict", r.strict, "exact match without normalization");
  cmd->add_option("--seed", r.seed, "base seed (env ACOMM_SEED)")->envname("ACOMM_SEED");
  cmd->add_option("--out", r.out, "output path")->required();
  cmd->add_flag("--force", r.force, "overwrite existing outputs");
  cmd->add_option("--jobs", r.jobs, "worker threads")->capture_default_str();
}

}  // namespace

const char* ToolVersion() { return ACOMM_VERSION; }

int RunCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"acomm: activation communication between language models", "acomm"};
  app.set_version_flag("--version", ACOMM_VERSION);
  app.set_config("--config", "", "key = value config file; flags win over it");
  app.require_subcommand(1);
  app.fallthrough();

  GenTasksArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-tasks", "generate a coordination-game dataset");
  gen_cmd->add_option("--game", gen.game, "countries|tipsheets")->capture_default_str();
  gen_cmd->add_option("--n", gen.n, "instances (default 100 countries, 70 tipsheets)");
  gen_cmd->add_option("--seed", gen.seed, "generator seed (env ACOMM_SEED)")->envname("ACOMM_SEED");
  gen_cmd->add_option("--out", gen.out, "JSONL output")->required();
  gen_cmd->add_flag("--force", gen.force, "overwrite existing outputs");

  InitModelArgs init;
  auto* init_cmd = app.add_subcommand("init-model", "write a randomly initialized model");
  init_cmd->add_option("--preset", init.preset, "toy")->capture_default_str();
  init_cmd->add_option("--layers", init.layers, "L");
  init_cmd->add_option("--heads", init.heads, "H");
  init_cmd->add_option("--key-size", init.key_size, "K");
  init_cmd->add_option("--ffn-size", init.ffn_size, "F");
  init_cmd->add_option("--model-dim", init.model_dim, "D, must equal H*K");
  init_cmd->add_option("--vocab-size", init.vocab_size, "V >= 259");
  init_cmd->add_option("--max-seq-len", init.max_seq_len);
  init_cmd->add_option("--seed", init.seed, "init seed (env ACOMM_SEED)")->envname("ACOMM_SEED");
  init_cmd->add_option("--out", init.out, "ACWT output")->required();
  init_cmd->add_flag("--force", init.force, "overwrite existing outputs");

  TrainMapArgs tm;
  auto* tm_cmd = app.add_subcommand("train-map", "fit the linear map W from A's to B's activations");
  tm_cmd->add_option("--model-a", tm.model_a)->required();
  tm_cmd->add_option("--model-b", tm.model_b)->required();
  tm_cmd->add_option("--corpus", tm.corpus, "sentences, one per line")->required();
  tm_cmd->add_option("--corpus-format", tm.corpus_format, "text|tasks")->capture_default_str();
  tm_cmd->add_option("--k", tm.k, "layer on A")->capture_default_str();
  tm_cmd->add_option("--j", tm.j, "layer on B")->capture_default_str();
  tm_cmd->add_option("--epochs", tm.train.epochs)->capture_default_str();
  tm_cmd->add_option("--batch", tm.train.batch_size)->capture_default_str();
  tm_cmd->add_option("--lr", tm.train.learning_rate)->capture_default_str();
  tm_cmd->add_option("--seed", tm.train.seed, "init and shuffle seed (env ACOMM_SEED)")
      ->envname("ACOMM_SEED");
  tm_cmd->add_option("--out", tm.out, "ACWT map output")->required();
  tm_cmd->add_option("--report", tm.report, "training report (default <out>.report.json)");
  tm_cmd->add_flag("--force", tm.force, "overwrite existing outputs");

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "run one protocol over a task file");
  AddRunOptions(run_cmd, run);

  SweepArgs sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "AC accuracy over a grid of (k, j)");
  AddRunOptions(sweep_cmd, sweep.run);
  sweep_cmd->add_option("--k-values", sweep.k_values, "comma separated")->delimiter(',')->required();
  sweep_cmd->add_option("--j-values", sweep.j_values, "comma separated")->delimiter(',')->required();
  sweep_cmd->add_option("--runs-out", sweep.runs_out, "per-run JSONL (default <out>.runs.jsonl)");

  CostArgs cost;
  auto* cost_cmd = app.add_subcommand("cost", "analytical FLOPs of NL vs AC");
  cost_cmd->add_option("--preset", cost.preset, "toy|llama1b|llama3b|llama8b")->capture_default_str();
  cost_cmd->add_option("--reference", cost.reference, "preset used for normalization")
      ->capture_default_str();
  cost_cmd->add_option("--L", cost.L, "layers");
  cost_cmd->add_option("--H", cost.H, "heads");
  cost_cmd->add_option("--K", cost.K, "key size");
  cost_cmd->add_option("--F", cost.F, "feed-forward size");
  cost_cmd->add_option("--D", cost.D, "model width");
  cost_cmd->add_option("--V", cost.V, "vocabulary size");
  cost_cmd->add_option("--P", cost.P, "prompt tokens")->capture_default_str();
  cost_cmd->add_option("--M", cost.M, "message tokens")->capture_default_str();
  cost_cmd->add_option("--T", cost.T, "output tokens")->capture_default_str();
  cost_cmd->add_option("--k", cost.k, "graft layer (default min(26, L))");
  cost_cmd->add_flag("--map-used", cost.map_used, "count a learned map instead of O(D)");
  cost_cmd->add_option("--dim-a", cost.dim_a, "d_A for the map term (default D)");
  cost_cmd->add_option("--dim-b", cost.dim_b, "d_B for the map term (default D)");
  cost_cmd->add_option("--out", cost.out, "JSON output (default stdout)");
  cost_cmd->add_flag("--force", cost.force, "overwrite existing outputs");

  ReportArgs report;
  auto* report_cmd = app.add_subcommand("report", "accuracy and bootstrap CI of a results file");
  report_cmd->add_option("--results", report.results)->required();
  report_cmd->add_option("--iters", report.iters)->capture_default_str();
  report_cmd->add_option("--level", report.level)->capture_default_str();
  report_cmd->add_option("--seed", report.seed, "bootstrap seed (env ACOMM_SEED)")
      ->envname("ACOMM_SEED");
  report_cmd->add_option("--out", report.out, "JSON output (also printed)");
  report_cmd->add_flag("--force", report.force, "overwrite existing outputs");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  try {
    if (*gen_cmd) return CmdGenTasks(gen, out);
    if (*init_cmd) return CmdInitModel(init, out);
    if (*tm_cmd) return CmdTrainMap(tm, out);
    if (*run_cmd) return CmdRun(run, out);
    if (*sweep_cmd) return CmdSweep(sweep, out);
    if (*cost_cmd) return CmdCost(cost, out);
    if (*report_cmd) return CmdReport(report, out);
  } catch (const PartialFailure& f) {
    err << "acomm: " << f.failures << " run(s) failed; see the error lines in the output\n";
    return kExitPartial;
  } catch (const Error& e) {
    err << "acomm: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::exception& e) {
    err << "acomm: " << e.what() << "\n";
    return kExitInvalid;
  }
  return kExitInvalid;
}

}  // namespace acomm
