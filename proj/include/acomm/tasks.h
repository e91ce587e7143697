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

#ifndef ACOMM_TASKS_H_
#define ACOMM_TASKS_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace acomm {

enum class Game { kCountries, kTipSheets };

const char* ToString(Game game);
Game ParseGame(const std::string& name);  // countries|tipsheets

struct TaskInstance {
  std::string id;
  Game game = Game::kCountries;
  std::string prompt_a;  // what A sees
  std::string prompt_b;  // what B sees
  std::string gold;

  friend bool operator==(const TaskInstance&, const TaskInstance&) = default;
};

// Bundled fact tables.
struct Landmark {
  std::string name;
  std::string country;
};
const std::vector<Landmark>& Landmarks();
const std::vector<std::string>& PersonNames();
const std::vector<std::string>& CompanyNames();

// Countries: "<person> is at the <landmark>." / "Which country is <person>
// located in?", gold = the landmark's country.
TaskInstance MakeCountriesInstance(std::string id, const std::string& person,
                                   const Landmark& landmark);
std::vector<TaskInstance> GenCountries(int n, std::uint64_t seed);
// Re-derives the gold answer from A's prompt via the fact table.
std::optional<std::string> SolveCountries(std::string_view prompt_a);

// Tip Sheets: three companies, each with an earnings change (percent), a
// stock price and an adverse-event flag. The dominant company has the highest
// price among those with no adverse event and a non-negative earnings change.
struct CompanyFacts {
  std::string name;
  int earnings_delta = 0;
  int stock_price = 0;
  bool adverse_event = false;
};

// Dominant company index, or nullopt when no eligible company exists or the
// top eligible price is tied.
std::optional<int> DominantCompany(std::span<const CompanyFacts> companies);
std::string RenderTipSheet(std::span<const CompanyFacts> companies);
std::string RenderInvestmentQuestion(std::span<const CompanyFacts> companies);
// Requires a unique dominant company.
TaskInstance MakeTipSheetInstance(std::string id, std::span<const CompanyFacts> companies);
std::vector<TaskInstance> GenTipSheets(int n, std::uint64_t seed);
// Parses the rendered tip sheet back into facts for the options listed in
// B's prompt and applies the dominance rule.
std::optional<std::string> SolveTipSheet(std::string_view prompt_a, std::string_view prompt_b);

// 1 iff the strings match after trimming whitespace, stripping trailing
// punctuation (.,!?;:) and lower-casing ASCII; with strict, raw equality.
int ScoreExact(std::string_view prediction, std::string_view gold, bool strict = false);
std::string NormalizeAnswer(std::string_view text);

struct EvalReport {
  int n = 0;
  double accuracy = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  int bootstrap_iters = 1000;
  double level = 0.95;
  std::uint64_t seed = 0;
};

// Percentile bootstrap. Each of `iters` resamples draws n indices with
// Rng::Below(n) from one Rng(seed) stream and records the resample mean. The
// sorted means give the CI by nearest rank: the bound for quantile q is
// element ceil(q * iters - 1e-9) - 1 (clamped to [0, iters - 1]), with
// q = (1 - level) / 2 and 1 - (1 - level) / 2. The interval is then widened,
// if needed, to contain the sample mean.
EvalReport BootstrapCi(std::span<const double> scores, int iters = 1000,
                       double level = 0.95, std::uint64_t seed = 0);

// JSON-lines task files: {id, game, prompt_a, prompt_b, gold}, keys sorted.
std::string TasksToJsonl(std::span<const TaskInstance> tasks);
std::vector<TaskInstance> TasksFromJsonl(std::string_view text);

}  // namespace acomm

#endif  // ACOMM_TASKS_H_
