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

#include "acomm/protocols.h"

#include <algorithm>

#include "acomm/digest.h"
#include "acomm/error.h"
#include "acomm/resources.h"

namespace acomm {
namespace {

constexpr std::string_view kAnswerEcho = "Answer:";

// Decoded text up to the first newline, with an echoed "Answer:" removed.
std::string ExtractAnswer(const std::string& text) {
  std::string_view view = text;
  const auto start = view.find_first_not_of(" \t");
  if (start != std::string_view::npos && view.substr(start).starts_with(kAnswerEcho)) {
    view.remove_prefix(start + kAnswerEcho.size());
  }
  const auto newline = view.find('\n');
  return std::string(view.substr(0, newline));
}

std::string AnswerPrompt(const std::string& context) {
  return RenderTemplate(resources::AnswerTemplate(), {{"context", context}});
}

DecodingConfig WithSeed(const DecodingConfig& base, std::uint64_t seed) {
  DecodingConfig dc = base;
  dc.seed = seed;
  return dc;
}

std::uint64_t PromptTokens(const std::string& prompt) { return prompt.size() + 1; }

ProtocolRun StartRun(ProtocolKind kind, const TaskInstance& task, const ProtocolOptions& opt) {
  ProtocolRun run;
  run.task_id = task.id;
  run.protocol = kind;
  run.gold = task.gold;
  run.seed = opt.seed;
  return run;
}

void Finish(ProtocolRun& run, const Generation& answer, const ProtocolOptions& opt) {
  run.answer = ExtractAnswer(answer.text);
  run.answer_tokens = answer.n_tokens;
  run.score = ScoreExact(run.answer, run.gold, opt.strict);
}

// Cost of answering with a single model and no communication.
std::optional<FlopCount> SoloCost(const Agent& agent, const std::string& prompt, int out_tokens) {
  if (!agent.model()) return std::nullopt;
  return FlopsSingleForward(ArchitectureOf(agent.model()->config), PromptTokens(prompt),
                            static_cast<std::uint64_t>(out_tokens));
}

}  // namespace

ModelAgent::ModelAgent(std::string name, std::shared_ptr<const Model> model,
                       DecodingConfig decoding)
    : Agent(std::move(name)), model_(std::move(model)), decoding_(decoding) {
  if (!model_) throw InvalidArgument("model agent needs a model");
}

Generation ModelAgent::Respond(const std::string& prompt, const DecodingConfig& decoding,
                               const GraftRequest* graft) const {
  const TokenSeq tokens = Tokenize(prompt, model_->config.max_seq_len);
  DecodeResult result;
  if (graft) {
    const GraftHook hook = MakeGraftHook(graft->source, graft->config);
    result = Decode(*model_, tokens, decoding, &hook);
  } else {
    result = Decode(*model_, tokens, decoding);
  }
  return {Detokenize(result.tokens), static_cast<int>(result.tokens.size())};
}

std::optional<ResidualState> ModelAgent::Activations(const std::string& text, int layer) const {
  return ForwardUntil(*model_, Tokenize(text, model_->config.max_seq_len), layer);
}

ScriptedAgent::ScriptedAgent(std::string name,
                             std::vector<std::pair<std::string, std::string>> rules,
                             std::string fallback)
    : Agent(std::move(name)), rules_(std::move(rules)), fallback_(std::move(fallback)) {
  std::stable_sort(rules_.begin(), rules_.end(), [](const auto& x, const auto& y) {
    return x.first.size() > y.first.size();
  });
}

ScriptedAgent ScriptedAgent::Oracle(std::string name, std::span<const TaskInstance> tasks,
                                    std::string fallback) {
  std::vector<std::pair<std::string, std::string>> rules;
  for (const TaskInstance& t : tasks) rules.emplace_back(t.prompt_a, t.gold);
  return ScriptedAgent(std::move(name), std::move(rules), std::move(fallback));
}

ScriptedAgent ScriptedAgent::Forwarder(std::string name, std::span<const TaskInstance> tasks,
                                       std::string fallback) {
  std::vector<std::pair<std::string, std::string>> rules;
  for (const TaskInstance& t : tasks) rules.emplace_back(t.prompt_a, t.prompt_a);
  return ScriptedAgent(std::move(name), std::move(rules), std::move(fallback));
}

Generation ScriptedAgent::Respond(const std::string& prompt, const DecodingConfig& decoding,
                                  const GraftRequest*) const {
  std::string text = fallback_;
  for (const auto& [key, response] : rules_) {
    if (!key.empty() && prompt.find(key) != std::string::npos) {
      text = response;
      break;
    }
  }
  if (text.size() > static_cast<std::size_t>(std::max(decoding.max_new_tokens, 0))) {
    text.resize(static_cast<std::size_t>(std::max(decoding.max_new_tokens, 0)));
  }
  return {text, static_cast<int>(text.size())};
}

const char* ToString(ProtocolKind kind) {
  switch (kind) {
    case ProtocolKind::kSilent: return "silent";
    case ProtocolKind::kSkyline: return "skyline";
    case ProtocolKind::kNl: return "nl";
    case ProtocolKind::kNld: return "nld";
    case ProtocolKind::kAc: return "ac";
  }
  return "?";
}

const char* ToString(AcVariant variant) {
  switch (variant) {
    case AcVariant::kBase: return "base";
    case AcVariant::kCot: return "cot";
    case AcVariant::kSelf: return "self";
  }
  return "?";
}

ProtocolKind ParseProtocolKind(const std::string& name) {
  for (ProtocolKind k : {ProtocolKind::kSilent, ProtocolKind::kSkyline, ProtocolKind::kNl,
                         ProtocolKind::kNld, ProtocolKind::kAc}) {
    if (name == ToString(k)) return k;
  }
  throw InvalidArgument("unknown protocol '" + name + "'");
}

AcVariant ParseAcVariant(const std::string& name) {
  for (AcVariant v : {AcVariant::kBase, AcVariant::kCot, AcVariant::kSelf}) {
    if (name == ToString(v)) return v;
  }
  throw InvalidArgument("unknown AC variant '" + name + "'");
}

std::string RenderTemplate(std::string_view tmpl,
                           const std::map<std::string, std::string>& values) {
  std::string out;
  for (std::size_t i = 0; i < tmpl.size();) {
    if (tmpl[i] == '{') {
      const auto close = tmpl.find('}', i);
      if (close != std::string_view::npos) {
        const auto it = values.find(std::string(tmpl.substr(i + 1, close - i - 1)));
        if (it != values.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out.push_back(tmpl[i++]);
  }
  return out;
}

const std::string& TemplatesDigest() {
  static const std::string digest = [] {
    std::string all;
    for (std::string_view t : {resources::AnswerTemplate(), resources::MessageTemplate(),
                               resources::ReceiveTemplate(), resources::RefineTemplate(),
                               resources::CotTemplate()}) {
      all += t;
      all.push_back('\0');
    }
    return Sha256Hex(all);
  }();
  return digest;
}

ProtocolRun RunSilent(const Agent& b, const TaskInstance& task, const ProtocolOptions& opt) {
  ProtocolRun run = StartRun(ProtocolKind::kSilent, task, opt);
  const std::string prompt = AnswerPrompt(task.prompt_b);
  run.prompts.emplace_back(b.name(), prompt);
  const Generation g = b.Respond(prompt, WithSeed(b.decoding(), DeriveSeed(opt.seed, 1)));
  Finish(run, g, opt);
  run.nl_flops = SoloCost(b, prompt, g.n_tokens);
  return run;
}

ProtocolRun RunSkyline(const Agent& agent, const TaskInstance& task, const ProtocolOptions& opt) {
  ProtocolRun run = StartRun(ProtocolKind::kSkyline, task, opt);
  const std::string context =
      task.prompt_a.empty() ? task.prompt_b : task.prompt_a + "\n" + task.prompt_b;
  const std::string prompt = AnswerPrompt(context);
  run.prompts.emplace_back(agent.name(), prompt);
  const Generation g = agent.Respond(prompt, WithSeed(agent.decoding(), DeriveSeed(opt.seed, 1)));
  Finish(run, g, opt);
  run.nl_flops = SoloCost(agent, prompt, g.n_tokens);
  return run;
}

ProtocolRun RunNl(const Agent& a, const Agent& b, const TaskInstance& task,
                  const ProtocolOptions& opt) {
  if (opt.message_tokens < 0) throw InvalidArgument("message budget must be >= 0");
  ProtocolRun run = StartRun(ProtocolKind::kNl, task, opt);
  const std::string a_prompt =
      RenderTemplate(resources::MessageTemplate(), {{"context", task.prompt_a}});
  run.prompts.emplace_back(a.name(), a_prompt);
  DecodingConfig a_dc = WithSeed(a.decoding(), DeriveSeed(opt.seed, 0));
  a_dc.max_new_tokens = opt.message_tokens;
  const Generation message = a.Respond(a_prompt, a_dc);
  run.transcript.push_back({a.name(), "message", 1, message.text, message.n_tokens});

  const std::string b_prompt = AnswerPrompt(RenderTemplate(
      resources::ReceiveTemplate(), {{"x_b", task.prompt_b}, {"message", message.text}}));
  run.prompts.emplace_back(b.name(), b_prompt);
  const Generation g = b.Respond(b_prompt, WithSeed(b.decoding(), DeriveSeed(opt.seed, 1)));
  Finish(run, g, opt);
  if (b.model()) {
    CostParams p;
    p.arch = ArchitectureOf(b.model()->config);
    p.prompt_tokens = PromptTokens(AnswerPrompt(task.prompt_b));
    p.message_tokens = static_cast<std::uint64_t>(message.n_tokens);
    p.output_tokens = static_cast<std::uint64_t>(g.n_tokens);
    run.nl_flops = FlopsNl(p);
  }
  return run;
}

ProtocolRun RunNld(std::span<const Agent* const> agents, const TaskInstance& task,
                   const ProtocolOptions& opt) {
  if (agents.empty()) throw InvalidArgument("debate needs at least one agent");
  if (opt.rounds < 1) throw InvalidArgument("debate needs at least one round");
  ProtocolRun run = StartRun(ProtocolKind::kNld, task, opt);
  const std::size_t n = agents.size();
  std::vector<std::string> previous(n), current(n);
  std::optional<FlopCount> total = FlopCount{0};
  for (int round = 1; round <= opt.rounds; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      const Agent& agent = *agents[i];
      const std::string& context = i + 1 == n ? task.prompt_b : task.prompt_a;
      std::string prompt;
      if (round == 1) {
        prompt = AnswerPrompt(context);
      } else {
        std::string peers;
        for (std::size_t p = 0; p < n; ++p) {
          if (p == i) continue;
          if (!peers.empty()) peers += "; ";
          peers += previous[p];
        }
        prompt = RenderTemplate(resources::RefineTemplate(),
                                {{"context", context}, {"own", previous[i]}, {"peers", peers}});
      }
      if (round == 1) run.prompts.emplace_back(agent.name(), prompt);
      const std::uint64_t stream = static_cast<std::uint64_t>(round) * n + i;
      const Generation g = agent.Respond(prompt, WithSeed(agent.decoding(), DeriveSeed(opt.seed, stream)));
      run.transcript.push_back({agent.name(), "answer", round, g.text, g.n_tokens});
      current[i] = ExtractAnswer(g.text);
      const std::optional<FlopCount> cost = SoloCost(agent, prompt, g.n_tokens);
      if (total && cost) {
        total = *total + *cost;
      } else {
        total.reset();
      }
    }
    previous = current;
  }

  // Majority over normalized answers; ties favour the group containing the
  // highest-index agent.
  std::map<std::string, std::pair<int, std::size_t>> votes;  // count, latest agent
  for (std::size_t i = 0; i < n; ++i) {
    auto& v = votes[NormalizeAnswer(current[i])];
    ++v.first;
    v.second = i;
  }
  std::pair<int, std::size_t> best{-1, 0};
  for (const auto& [_, v] : votes) best = std::max(best, v);
  run.answer = current[best.second];
  run.answer_tokens = run.transcript[run.transcript.size() - n + best.second].n_tokens;
  run.score = ScoreExact(run.answer, run.gold, opt.strict);
  run.nl_flops = total;
  return run;
}

ProtocolRun RunAc(const Agent& a, const Agent& b, const TaskInstance& task,
                  const ProtocolOptions& opt) {
  ProtocolRun run = StartRun(ProtocolKind::kAc, task, opt);
  const GraftConfig& graft = opt.graft;
  graft.combine.Validate();
  run.variant = opt.variant;
  run.k = graft.source_layer;
  run.j = graft.target_layer;
  run.f = graft.combine.kind;
  run.scope = graft.combine.scope;

  const Agent& sender = opt.variant == AcVariant::kSelf ? b : a;
  const std::string a_prompt =
      opt.variant == AcVariant::kCot
          ? RenderTemplate(resources::CotTemplate(), {{"context", task.prompt_a}})
          : AnswerPrompt(task.prompt_a);
  run.prompts.emplace_back(sender.name(), a_prompt);

  std::string source_text = a_prompt;
  if (opt.variant != AcVariant::kBase) {
    DecodingConfig dc = WithSeed(sender.decoding(), DeriveSeed(opt.seed, 0));
    if (opt.variant == AcVariant::kSelf) {
      dc.strategy = Strategy::kNucleus;
      dc.top_p = 1.0;
      dc.temperature = opt.self_temperature;
      dc.max_new_tokens = opt.self_tokens;
    }
    const Generation thought = sender.Respond(a_prompt, dc);
    run.transcript.push_back({sender.name(), "thought", 1, thought.text, thought.n_tokens});
    source_text += thought.text;
  }

  const std::string b_prompt = AnswerPrompt(task.prompt_b);
  run.prompts.emplace_back(b.name(), b_prompt);
  std::optional<ResidualState> source = sender.Activations(source_text, graft.source_layer);
  if (b.model()) {
    const int depth = b.model()->config.n_layers;
    if (graft.target_layer < 0 || graft.target_layer > depth) {
      throw InvalidArgument("target layer j=" + std::to_string(graft.target_layer) +
                            " outside B's depth " + std::to_string(depth));
    }
  }
  const DecodingConfig b_dc = WithSeed(b.decoding(), DeriveSeed(opt.seed, 1));
  Generation g;
  if (source && b.model()) {
    const GraftRequest request{std::move(*source), graft};
    g = b.Respond(b_prompt, b_dc, &request);
  } else {
    g = b.Respond(b_prompt, b_dc);
  }
  Finish(run, g, opt);

  if (b.model()) {
    CostParams p;
    p.arch = ArchitectureOf(b.model()->config);
    p.prompt_tokens = PromptTokens(b_prompt);
    p.output_tokens = static_cast<std::uint64_t>(g.n_tokens);
    p.graft_layer = static_cast<std::uint64_t>(graft.source_layer);
    p.map_used = graft.combine.pre_map.has_value();
    if (p.map_used) {
      p.dim_a = static_cast<std::uint64_t>(graft.combine.pre_map->dim_in());
      p.dim_b = static_cast<std::uint64_t>(graft.combine.pre_map->dim_out());
    }
    run.ac_flops = FlopsAc(p);
  }
  return run;
}

ProtocolRun RunProtocol(ProtocolKind kind, const Agent& a, const Agent& b,
                        const TaskInstance& task, const ProtocolOptions& opt) {
  switch (kind) {
    case ProtocolKind::kSilent: return RunSilent(b, task, opt);
    case ProtocolKind::kSkyline: return RunSkyline(b, task, opt);
    case ProtocolKind::kNl: return RunNl(a, b, task, opt);
    case ProtocolKind::kNld: {
      const Agent* agents[] = {&a, &b};
      return RunNld(agents, task, opt);
    }
    case ProtocolKind::kAc: return RunAc(a, b, task, opt);
  }
  throw InvalidArgument("unknown protocol");
}

SweepResult SweepLayers(const Agent& a, const Agent& b, std::span<const TaskInstance> tasks,
                        std::span<const int> k_values, std::span<const int> j_values,
                        const ProtocolOptions& opt) {
  if (k_values.empty() || j_values.empty()) throw InvalidArgument("sweep ranges must be non-empty");
  if (tasks.empty()) throw InvalidArgument("sweep needs at least one task");
  SweepResult out;
  out.k_values.assign(k_values.begin(), k_values.end());
  out.j_values.assign(j_values.begin(), j_values.end());
  for (int k : k_values) {
    std::vector<double> row;
    for (int j : j_values) {
      ProtocolOptions cell = opt;
      cell.graft.source_layer = k;
      cell.graft.target_layer = j;
      int correct = 0;
      for (std::size_t i = 0; i < tasks.size(); ++i) {
        cell.seed = DeriveSeed(opt.seed, i);
        ProtocolRun run = RunAc(a, b, tasks[i], cell);
        correct += run.score;
        out.runs.push_back(std::move(run));
      }
      row.push_back(static_cast<double>(correct) / static_cast<double>(tasks.size()));
    }
    out.accuracy.push_back(std::move(row));
  }
  return out;
}

std::uint64_t DeriveSeed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

nlohmann::json FlopsToJson(const std::optional<FlopCount>& flops) {
  if (!flops) return nullptr;
  if (*flops <= UINT64_MAX) return static_cast<std::uint64_t>(*flops);
  return ToString(*flops);
}

nlohmann::json ToJson(const ProtocolRun& run) {
  nlohmann::json transcript = nlohmann::json::array();
  for (const TranscriptEntry& e : run.transcript) {
    transcript.push_back({{"author", e.author}, {"kind", e.kind}, {"round", e.round},
                          {"text", e.text}, {"n_tokens", e.n_tokens}});
  }
  auto opt_int = [](const std::optional<int>& v) -> nlohmann::json {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  return {
      {"task_id", run.task_id},
      {"protocol", ToString(run.protocol)},
      {"variant", run.variant ? nlohmann::json(ToString(*run.variant)) : nlohmann::json(nullptr)},
      {"k", opt_int(run.k)},
      {"j", opt_int(run.j)},
      {"f", run.f ? nlohmann::json(ToString(*run.f)) : nlohmann::json(nullptr)},
      {"scope", run.scope ? nlohmann::json(ToString(*run.scope)) : nlohmann::json(nullptr)},
      {"answer", run.answer},
      {"answer_tokens", run.answer_tokens},
      {"gold", run.gold},
      {"score", run.score},
      {"nl_flops_model", FlopsToJson(run.nl_flops)},
      {"ac_flops_model", FlopsToJson(run.ac_flops)},
      {"seed", run.seed},
      {"transcript", std::move(transcript)},
      {"templates_sha256", TemplatesDigest()},
  };
}

std::string DumpJson(const nlohmann::json& value, int indent) {
  return value.dump(indent, ' ', false, nlohmann::json::error_handler_t::replace);
}

}  // namespace acomm
