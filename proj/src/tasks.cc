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

#include "acomm/tasks.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <regex>
#include <sstream>

#include "acomm/error.h"
#include "acomm/resources.h"
#include "acomm/rng.h"
#include "json.hpp"

namespace acomm {
namespace {

std::vector<std::string> Lines(std::string_view text) {
  std::vector<std::string> out;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    out.push_back(line);
  }
  return out;
}

std::string Pad4(int i) {
  std::string s = std::to_string(i);
  return std::string(s.size() < 4 ? 4 - s.size() : 0, '0') + s;
}

constexpr std::string_view kCountriesQuestionPrefix = "Which country is ";
constexpr std::string_view kAt = " is at the ";

}  // namespace

const char* ToString(Game game) {
  return game == Game::kCountries ? "countries" : "tipsheets";
}

Game ParseGame(const std::string& name) {
  if (name == "countries") return Game::kCountries;
  if (name == "tipsheets") return Game::kTipSheets;
  throw InvalidArgument("unknown game '" + name + "'");
}

const std::vector<Landmark>& Landmarks() {
  static const std::vector<Landmark> table = [] {
    std::vector<Landmark> out;
    for (const std::string& line : Lines(resources::CountriesTsv())) {
      const auto tab = line.find('\t');
      if (tab == std::string::npos) throw FormatError("countries table: missing tab");
      out.push_back({line.substr(0, tab), line.substr(tab + 1)});
    }
    return out;
  }();
  return table;
}

const std::vector<std::string>& PersonNames() {
  static const std::vector<std::string> names = Lines(resources::NamesTxt());
  return names;
}

const std::vector<std::string>& CompanyNames() {
  static const std::vector<std::string> names = Lines(resources::CompaniesTxt());
  return names;
}

TaskInstance MakeCountriesInstance(std::string id, const std::string& person,
                                   const Landmark& landmark) {
  TaskInstance t;
  t.id = std::move(id);
  t.game = Game::kCountries;
  t.prompt_a = person + std::string(kAt) + landmark.name + ".";
  t.prompt_b = std::string(kCountriesQuestionPrefix) + person + " located in?";
  t.gold = landmark.country;
  return t;
}

std::vector<TaskInstance> GenCountries(int n, std::uint64_t seed) {
  if (n < 1) throw InvalidArgument("n must be >= 1");
  Rng rng(seed);
  const auto& names = PersonNames();
  const auto& landmarks = Landmarks();
  std::vector<TaskInstance> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    const std::string& person = names[rng.Below(names.size())];
    const Landmark& landmark = landmarks[rng.Below(landmarks.size())];
    out.push_back(MakeCountriesInstance("countries-" + Pad4(i), person, landmark));
  }
  return out;
}

std::optional<std::string> SolveCountries(std::string_view prompt_a) {
  const auto at = prompt_a.find(kAt);
  if (at == std::string_view::npos || !prompt_a.ends_with('.')) return std::nullopt;
  const std::string_view place =
      prompt_a.substr(at + kAt.size(), prompt_a.size() - at - kAt.size() - 1);
  for (const Landmark& l : Landmarks()) {
    if (l.name == place) return l.country;
  }
  return std::nullopt;
}

std::optional<int> DominantCompany(std::span<const CompanyFacts> companies) {
  std::optional<int> best;
  bool tied = false;
  for (int i = 0; i < static_cast<int>(companies.size()); ++i) {
    const CompanyFacts& c = companies[i];
    if (c.adverse_event || c.earnings_delta < 0) continue;
    if (!best || c.stock_price > companies[*best].stock_price) {
      best = i;
      tied = false;
    } else if (c.stock_price == companies[*best].stock_price) {
      tied = true;
    }
  }
  if (tied) return std::nullopt;
  return best;
}

std::string RenderTipSheet(std::span<const CompanyFacts> companies) {
  std::string out;
  auto sentence = [&out](const std::string& s) {
    if (!out.empty()) out += ' ';
    out += s;
  };
  for (const CompanyFacts& c : companies) {
    if (c.earnings_delta < 0) {
      sentence(c.name + " has taken a nosedive, as its quarterly earnings have dipped " +
               std::to_string(-c.earnings_delta) + "%.");
    } else if (c.earnings_delta > 0) {
      sentence(c.name + " grew its quarterly earnings by " +
               std::to_string(c.earnings_delta) + "%.");
    } else {
      sentence(c.name + " reported flat quarterly earnings.");
    }
    sentence("Shares of " + c.name + " closed at " + std::to_string(c.stock_price) + ".");
    if (c.adverse_event) {
      sentence(c.name + " is involved in an IP lawsuit with its competitors.");
    }
  }
  return out;
}

std::string RenderInvestmentQuestion(std::span<const CompanyFacts> companies) {
  std::string list;
  for (const CompanyFacts& c : companies) {
    if (!list.empty()) list += ", ";
    list += c.name;
  }
  return "You must invest in one company out of {" + list + "}. Which do you invest in?";
}

TaskInstance MakeTipSheetInstance(std::string id, std::span<const CompanyFacts> companies) {
  const std::optional<int> dominant = DominantCompany(companies);
  if (!dominant) throw InvalidArgument("tip sheet has no unique dominant company");
  TaskInstance t;
  t.id = std::move(id);
  t.game = Game::kTipSheets;
  t.prompt_a = RenderTipSheet(companies);
  t.prompt_b = RenderInvestmentQuestion(companies);
  t.gold = companies[*dominant].name;
  return t;
}

std::vector<TaskInstance> GenTipSheets(int n, std::uint64_t seed) {
  if (n < 1) throw InvalidArgument("n must be >= 1");
  Rng rng(seed);
  std::vector<std::string> pool = CompanyNames();
  std::vector<TaskInstance> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    std::vector<CompanyFacts> companies;
    do {
      rng.Shuffle(pool);
      companies.clear();
      for (int c = 0; c < 3; ++c) {
        CompanyFacts f;
        f.name = pool[c];
        f.earnings_delta = static_cast<int>(rng.Below(31)) - 15;
        f.stock_price = 20 + static_cast<int>(rng.Below(101));
        f.adverse_event = rng.Below(10) < 3;
        companies.push_back(f);
      }
    } while (!DominantCompany(companies));
    out.push_back(MakeTipSheetInstance("tipsheets-" + Pad4(i), companies));
  }
  return out;
}

std::optional<std::string> SolveTipSheet(std::string_view prompt_a, std::string_view prompt_b) {
  const auto open = prompt_b.find('{');
  const auto close = prompt_b.find('}', open);
  if (open == std::string_view::npos || close == std::string_view::npos) return std::nullopt;
  std::vector<CompanyFacts> companies;
  std::string list(prompt_b.substr(open + 1, close - open - 1));
  for (std::size_t start = 0;;) {
    const auto comma = list.find(", ", start);
    companies.push_back({list.substr(start, comma - start)});
    if (comma == std::string::npos) break;
    start = comma + 2;
  }
  const std::string sheet(prompt_a);
  auto quote = [](const std::string& s) {
    return std::regex_replace(s, std::regex(R"([.^$|()\[\]{}*+?\\])"), R"(\$&)");
  };
  for (CompanyFacts& c : companies) {
    const std::string name = quote(c.name);
    std::smatch m;
    if (std::regex_search(sheet, m, std::regex(name + R"( has taken a nosedive, as its quarterly earnings have dipped (\d+)%\.)"))) {
      c.earnings_delta = -std::stoi(m[1]);
    } else if (std::regex_search(sheet, m, std::regex(name + R"( grew its quarterly earnings by (\d+)%\.)"))) {
      c.earnings_delta = std::stoi(m[1]);
    } else if (sheet.find(c.name + " reported flat quarterly earnings.") == std::string::npos) {
      return std::nullopt;
    }
    if (!std::regex_search(sheet, m, std::regex("Shares of " + name + R"( closed at (\d+)\.)"))) {
      return std::nullopt;
    }
    c.stock_price = std::stoi(m[1]);
    c.adverse_event =
        sheet.find(c.name + " is involved in an IP lawsuit") != std::string::npos;
  }
  const std::optional<int> dominant = DominantCompany(companies);
  if (!dominant) return std::nullopt;
  return companies[*dominant].name;
}

std::string NormalizeAnswer(std::string_view text) {
  auto is_space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
  auto is_punct = [](char c) { return std::string_view(".,!?;:").find(c) != std::string_view::npos; };
  while (!text.empty() && is_space(text.front())) text.remove_prefix(1);
  while (!text.empty() && (is_space(text.back()) || is_punct(text.back()))) text.remove_suffix(1);
  std::string out(text);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

int ScoreExact(std::string_view prediction, std::string_view gold, bool strict) {
  if (strict) return prediction == gold ? 1 : 0;
  return NormalizeAnswer(prediction) == NormalizeAnswer(gold) ? 1 : 0;
}

EvalReport BootstrapCi(std::span<const double> scores, int iters, double level,
                       std::uint64_t seed) {
  if (scores.empty()) throw InvalidArgument("bootstrap of an empty score list");
  if (iters < 1) throw InvalidArgument("bootstrap iterations must be >= 1");
  if (!(level > 0.0 && level < 1.0)) throw InvalidArgument("level must be in (0, 1)");
  const std::size_t n = scores.size();
  EvalReport r;
  r.n = static_cast<int>(n);
  r.bootstrap_iters = iters;
  r.level = level;
  r.seed = seed;
  double total = 0.0;
  for (double s : scores) total += s;
  r.accuracy = total / static_cast<double>(n);

  Rng rng(seed);
  std::vector<double> means(iters);
  for (int it = 0; it < iters; ++it) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += scores[rng.Below(n)];
    means[it] = sum / static_cast<double>(n);
  }
  std::sort(means.begin(), means.end());
  auto nearest_rank = [&](double q) {
    const long long rank = static_cast<long long>(std::ceil(q * iters - 1e-9)) - 1;
    return means[std::clamp<long long>(rank, 0, iters - 1)];
  };
  const double tail = (1.0 - level) / 2.0;
  r.ci_low = std::min(nearest_rank(tail), r.accuracy);
  r.ci_high = std::max(nearest_rank(1.0 - tail), r.accuracy);
  return r;
}

std::string TasksToJsonl(std::span<const TaskInstance> tasks) {
  std::string out;
  for (const TaskInstance& t : tasks) {
    const nlohmann::json j = {{"id", t.id},           {"game", ToString(t.game)},
                              {"prompt_a", t.prompt_a}, {"prompt_b", t.prompt_b},
                              {"gold", t.gold}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<TaskInstance> TasksFromJsonl(std::string_view text) {
  std::vector<TaskInstance> out;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      TaskInstance t;
      t.id = j.at("id").get<std::string>();
      t.game = ParseGame(j.at("game").get<std::string>());
      t.prompt_a = j.at("prompt_a").get<std::string>();
      t.prompt_b = j.at("prompt_b").get<std::string>();
      t.gold = j.at("gold").get<std::string>();
      out.push_back(std::move(t));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("task line " + std::to_string(line_no) + ": " + e.what());
    } catch (const InvalidArgument& e) {
      throw FormatError("task line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace acomm
