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

#ifndef ACOMM_PROTOCOLS_H_
#define ACOMM_PROTOCOLS_H_

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "acomm/costmodel.h"
#include "acomm/engine.h"
#include "acomm/grafting.h"
#include "acomm/model.h"
#include "acomm/tasks.h"
#include "json.hpp"

namespace acomm {

struct Generation {
  std::string text;
  int n_tokens = 0;
};

// A graft to apply to the responder's prompt state: A's activations plus
// where and how to combine them.
struct GraftRequest {
  ResidualState source;
  GraftConfig config;
};

// A participant in a protocol. Model-backed agents expose activations;
// scripted agents do not, and ignore grafts.
class Agent {
 public:
  explicit Agent(std::string name) : name_(std::move(name)) {}
  virtual ~Agent() = default;

  const std::string& name() const { return name_; }

  virtual Generation Respond(const std::string& prompt, const DecodingConfig& decoding,
                             const GraftRequest* graft = nullptr) const = 0;
  // Residual state at `layer` for the tokenized text, or nullopt when the
  // agent has no internals.
  virtual std::optional<ResidualState> Activations(const std::string& text,
                                                   int layer) const = 0;
  // nullptr for scripted agents.
  virtual const Model* model() const = 0;
  virtual const DecodingConfig& decoding() const = 0;

 private:
  std::string name_;
};

class ModelAgent : public Agent {
 public:
  ModelAgent(std::string name, std::shared_ptr<const Model> model, DecodingConfig decoding);

  Generation Respond(const std::string& prompt, const DecodingConfig& decoding,
                     const GraftRequest* graft = nullptr) const override;
  std::optional<ResidualState> Activations(const std::string& text, int layer) const override;
  const Model* model() const override { return model_.get(); }
  const DecodingConfig& decoding() const override { return decoding_; }

 private:
  std::shared_ptr<const Model> model_;
  DecodingConfig decoding_;
};

// Deterministic oracle agent: answers with the response of the longest rule
// whose key occurs in the visible prompt, else the fallback. Responses are
// truncated to max_new_tokens bytes.
class ScriptedAgent : public Agent {
 public:
  ScriptedAgent(std::string name, std::vector<std::pair<std::string, std::string>> rules,
                std::string fallback);

  // Answers gold when a task's prompt_a is visible.
  static ScriptedAgent Oracle(std::string name, std::span<const TaskInstance> tasks,
                              std::string fallback = "I don't know");
  // Repeats a task's prompt_a verbatim when it is visible.
  static ScriptedAgent Forwarder(std::string name, std::span<const TaskInstance> tasks,
                                 std::string fallback = "");

  Generation Respond(const std::string& prompt, const DecodingConfig& decoding,
                     const GraftRequest* graft = nullptr) const override;
  std::optional<ResidualState> Activations(const std::string&, int) const override {
    return std::nullopt;
  }
  const Model* model() const override { return nullptr; }
  const DecodingConfig& decoding() const override { return decoding_; }

 private:
  std::vector<std::pair<std::string, std::string>> rules_;
  std::string fallback_;
  DecodingConfig decoding_;
};

enum class ProtocolKind { kSilent, kSkyline, kNl, kNld, kAc };
enum class AcVariant { kBase, kCot, kSelf };

const char* ToString(ProtocolKind kind);
const char* ToString(AcVariant variant);
ProtocolKind ParseProtocolKind(const std::string& name);  // silent|skyline|nl|nld|ac
AcVariant ParseAcVariant(const std::string& name);        // base|cot|self

struct ProtocolOptions {
  std::uint64_t seed = 0;
  int message_tokens = 32;  // NL message budget M
  int rounds = 2;           // NLD rounds r
  bool strict = false;      // exact match without normalization
  AcVariant variant = AcVariant::kBase;
  GraftConfig graft;
  double self_temperature = 0.7;
  int self_tokens = 512;
};

struct TranscriptEntry {
  std::string author;
  std::string kind;  // "message", "answer" or "thought"
  int round = 0;
  std::string text;
  int n_tokens = 0;

  friend bool operator==(const TranscriptEntry&, const TranscriptEntry&) = default;
};

struct ProtocolRun {
  std::string task_id;
  ProtocolKind protocol = ProtocolKind::kSilent;
  std::optional<AcVariant> variant;
  std::optional<int> k, j;
  std::optional<CombineKind> f;
  std::optional<GraftScope> scope;
  std::vector<std::pair<std::string, std::string>> prompts;  // (agent, prompt)
  std::vector<TranscriptEntry> transcript;
  std::string answer;
  int answer_tokens = 0;
  std::string gold;
  int score = 0;
  std::optional<FlopCount> nl_flops;
  std::optional<FlopCount> ac_flops;
  std::uint64_t seed = 0;
};

// Fixed prompt templates. Placeholders are {context}, {x_b}, {message},
// {own} and {peers}; substituted text is never re-scanned.
std::string RenderTemplate(std::string_view tmpl,
                           const std::map<std::string, std::string>& values);
// SHA-256 over all templates, recorded with every run.
const std::string& TemplatesDigest();

// Silent: B answers x_B alone.
ProtocolRun RunSilent(const Agent& b, const TaskInstance& task, const ProtocolOptions& opt);
// Skyline: one agent answers x_A, a newline and x_B (just x_B when x_A is empty).
ProtocolRun RunSkyline(const Agent& agent, const TaskInstance& task, const ProtocolOptions& opt);
// NL: A writes a message of at most M tokens from x_A; B answers x_B plus the message.
ProtocolRun RunNl(const Agent& a, const Agent& b, const TaskInstance& task,
                  const ProtocolOptions& opt);
// Debate: the last agent is B and sees x_B, the others see x_A. Round 1 answers
// independently; later rounds refine given the agent's previous answer and its
// peers'. The final answer is the majority of final-round answers (compared
// after normalization); ties go to the group holding the highest-index agent.
ProtocolRun RunNld(std::span<const Agent* const> agents, const TaskInstance& task,
                   const ProtocolOptions& opt);
// Activation communication. base: A's layer-k state on x_A is grafted into B
// at layer j. cot: A first answers a step-by-step prompt; the state is taken
// on prompt + response. self: B's own model samples a completion of x_A at
// self_temperature and the completion's final-token state is grafted.
ProtocolRun RunAc(const Agent& a, const Agent& b, const TaskInstance& task,
                  const ProtocolOptions& opt);

ProtocolRun RunProtocol(ProtocolKind kind, const Agent& a, const Agent& b,
                        const TaskInstance& task, const ProtocolOptions& opt);

struct SweepResult {
  std::vector<int> k_values;
  std::vector<int> j_values;
  std::vector<std::vector<double>> accuracy;  // [k index][j index]
  std::vector<ProtocolRun> runs;              // cell-major, then task order
};

// Accuracy of RunAc for every (k, j); tasks and seeds are identical in every
// cell. Task i runs with seed DeriveSeed(opt.seed, i).
SweepResult SweepLayers(const Agent& a, const Agent& b, std::span<const TaskInstance> tasks,
                        std::span<const int> k_values, std::span<const int> j_values,
                        const ProtocolOptions& opt);

// SplitMix64 of (base, stream).
std::uint64_t DeriveSeed(std::uint64_t base, std::uint64_t stream);

nlohmann::json FlopsToJson(const std::optional<FlopCount>& flops);
// One JSON-lines record. Keys are sorted so output is byte-stable.
nlohmann::json ToJson(const ProtocolRun& run);

// Compact dump; invalid UTF-8 from byte-level sampling becomes U+FFFD.
std::string DumpJson(const nlohmann::json& value, int indent = -1);

}  // namespace acomm

#endif  // ACOMM_PROTOCOLS_H_
