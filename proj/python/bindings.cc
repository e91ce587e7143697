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

#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "acomm/cli.h"
#include "acomm/costmodel.h"
#include "acomm/engine.h"
#include "acomm/error.h"
#include "acomm/grafting.h"
#include "acomm/mapper.h"
#include "acomm/model.h"
#include "acomm/protocols.h"
#include "acomm/tasks.h"

namespace py = pybind11;
using namespace acomm;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

Matrix ToMatrix(const FloatArray& a) {
  if (a.ndim() != 2) throw InvalidArgument("expected a 2-d array");
  const auto rows = static_cast<int>(a.shape(0)), cols = static_cast<int>(a.shape(1));
  return Matrix(rows, cols, std::vector<float>(a.data(), a.data() + a.size()));
}

py::array_t<float> ToArray(const Matrix& m) {
  py::array_t<float> out({m.rows(), m.cols()});
  std::copy(m.flat().begin(), m.flat().end(), out.mutable_data());
  return out;
}

std::vector<float> ToVector(const FloatArray& a) {
  if (a.ndim() != 1) throw InvalidArgument("expected a 1-d array");
  return {a.data(), a.data() + a.size()};
}

// 128-bit counts become Python ints through their decimal string.
py::int_ ToInt(FlopCount v) { return py::int_(py::str(ToString(v))); }

CombineSpec MakeSpec(const std::string& kind, const std::string& scope,
                     const std::optional<FloatArray>& pre_map) {
  CombineSpec spec{ParseCombineKind(kind), ParseGraftScope(scope), std::nullopt};
  if (pre_map) spec.pre_map = MapMatrix{ToMatrix(*pre_map)};
  spec.Validate();
  return spec;
}

py::dict TaskToDict(const TaskInstance& t) {
  py::dict d;
  d["id"] = t.id;
  d["game"] = ToString(t.game);
  d["prompt_a"] = t.prompt_a;
  d["prompt_b"] = t.prompt_b;
  d["gold"] = t.gold;
  return d;
}

std::vector<py::dict> TasksToList(const std::vector<TaskInstance>& tasks) {
  std::vector<py::dict> out;
  for (const auto& t : tasks) out.push_back(TaskToDict(t));
  return out;
}

}  // namespace

PYBIND11_MODULE(_acomm, m) {
  m.doc() = "Activation communication between language models";
  m.attr("__version__") = ToolVersion();

  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<ContextOverflow>(m, "ContextOverflow", PyExc_ValueError);

  py::class_<ModelConfig>(m, "ModelConfig")
      .def(py::init<>())
      .def_readwrite("n_layers", &ModelConfig::n_layers)
      .def_readwrite("n_heads", &ModelConfig::n_heads)
      .def_readwrite("key_size", &ModelConfig::key_size)
      .def_readwrite("ffn_size", &ModelConfig::ffn_size)
      .def_readwrite("model_dim", &ModelConfig::model_dim)
      .def_readwrite("vocab_size", &ModelConfig::vocab_size)
      .def_readwrite("max_seq_len", &ModelConfig::max_seq_len)
      .def_readwrite("ln_epsilon", &ModelConfig::ln_epsilon)
      .def("validate", &ModelConfig::Validate)
      .def("__eq__", [](const ModelConfig& a, const ModelConfig& b) { return a == b; });

  py::class_<Model, std::shared_ptr<Model>>(m, "Model")
      .def_readonly("config", &Model::config)
      .def("digest", [](const Model& model) { return ModelDigest(model); })
      .def("save", [](const Model& model, const std::filesystem::path& p) { SaveModel(p, model); });

  m.def("toy_config", &ToyConfig);
  m.def("init_random_model",
        [](const ModelConfig& c, std::uint64_t seed) {
          return std::make_shared<Model>(InitRandomModel(c, seed));
        },
        py::arg("config"), py::arg("seed"));
  m.def("load_model",
        [](const std::filesystem::path& p) { return std::make_shared<Model>(LoadModel(p)); });

  m.def("tokenize", [](const std::string& text, int max_seq_len) {
    const TokenSeq t = Tokenize(text, max_seq_len);
    return std::vector<std::int32_t>(t.begin(), t.end());
  }, py::arg("text"), py::arg("max_seq_len") = 1024);
  m.def("detokenize", [](const std::vector<std::int32_t>& ids) {
    return py::bytes(Detokenize(ids));
  });

  m.def("forward_until", [](const Model& model, const std::vector<std::int32_t>& ids, int layer) {
    return ToArray(ForwardUntil(model, ids, layer).values);
  }, py::arg("model"), py::arg("tokens"), py::arg("layer"));
  m.def("forward_from", [](const Model& model, const FloatArray& state, int layer) {
    return ToArray(ForwardFrom(model, ResidualState{ToMatrix(state), layer}, layer));
  }, py::arg("model"), py::arg("state"), py::arg("layer"));
  m.def("forward_full", [](const Model& model, const std::vector<std::int32_t>& ids) {
    return ToArray(ForwardFull(model, ids));
  });

  m.def("decode",
        [](const Model& model, const std::vector<std::int32_t>& prompt, const std::string& strategy,
           double top_p, double temperature, int max_new_tokens, std::uint64_t seed,
           std::optional<FloatArray> graft_source, int source_layer, int target_layer,
           const std::string& f, const std::string& scope, bool cached) {
          DecodingConfig dc;
          if (strategy == "greedy") {
            dc.strategy = Strategy::kGreedy;
          } else if (strategy == "nucleus") {
            dc.strategy = Strategy::kNucleus;
          } else {
            throw InvalidArgument("strategy must be greedy or nucleus");
          }
          dc.top_p = top_p;
          dc.temperature = temperature;
          dc.max_new_tokens = max_new_tokens;
          dc.seed = seed;
          std::optional<GraftHook> hook;
          if (graft_source) {
            const GraftConfig g{source_layer, target_layer, MakeSpec(f, scope, std::nullopt)};
            hook = MakeGraftHook(ResidualState{ToMatrix(*graft_source), source_layer}, g);
          }
          const GraftHook* h = hook ? &*hook : nullptr;
          const DecodeResult r = cached ? Decode(model, prompt, dc, h) : DecodeUncached(model, prompt, dc, h);
          return py::make_tuple(std::vector<std::int32_t>(r.tokens.begin(), r.tokens.end()), r.hit_eos);
        },
        py::arg("model"), py::arg("prompt"), py::arg("strategy") = "greedy",
        py::arg("top_p") = 0.9, py::arg("temperature") = 1.0, py::arg("max_new_tokens") = 32,
        py::arg("seed") = 0, py::arg("graft_source") = std::nullopt, py::arg("source_layer") = 0,
        py::arg("target_layer") = 0, py::arg("f") = "replace", py::arg("scope") = "last",
        py::arg("cached") = true,
        "Returns (tokens, hit_eos). graft_source is A's residual state at source_layer.");

  m.def("combine",
        [](const FloatArray& a, const FloatArray& b, const std::string& kind,
           std::optional<FloatArray> pre_map) {
          const auto va = ToVector(a), vb = ToVector(b);
          const auto out = Combine(va, vb, MakeSpec(kind, "last", pre_map));
          return py::array_t<float>(out.size(), out.data());
        },
        py::arg("a"), py::arg("b"), py::arg("kind"), py::arg("pre_map") = std::nullopt);

  m.def("mse_loss", [](const FloatArray& w, const FloatArray& x, const FloatArray& z) {
    return MseLoss(MapMatrix{ToMatrix(w)}, PairDataset{ToMatrix(x), ToMatrix(z)});
  }, py::arg("w"), py::arg("inputs"), py::arg("targets"));
  m.def("loss_gradient", [](const FloatArray& w, const FloatArray& x, const FloatArray& z) {
    return ToArray(LossGradient(MapMatrix{ToMatrix(w)}, PairDataset{ToMatrix(x), ToMatrix(z)}));
  }, py::arg("w"), py::arg("inputs"), py::arg("targets"));
  m.def("train_map",
        [](const FloatArray& x, const FloatArray& z, int epochs, int batch_size, double lr,
           std::uint64_t seed) {
          TrainOptions opt;
          opt.epochs = epochs;
          opt.batch_size = batch_size;
          opt.learning_rate = lr;
          opt.seed = seed;
          const TrainResult r = TrainMap(PairDataset{ToMatrix(x), ToMatrix(z)}, opt);
          py::dict report;
          report["epoch_losses"] = r.report.epoch_losses;
          report["final_loss"] = r.report.final_loss;
          return py::make_tuple(ToArray(r.map.values), report);
        },
        py::arg("inputs"), py::arg("targets"), py::arg("epochs") = 10, py::arg("batch_size") = 32,
        py::arg("lr") = 0.001, py::arg("seed") = 0);
  m.def("activation_similarity", [](const FloatArray& x, const FloatArray& y) {
    return ActivationSimilarity(ToMatrix(x), ToMatrix(y));
  });

  m.def("cost",
        [](const std::string& preset, std::uint64_t P, std::uint64_t M, std::uint64_t T,
           std::uint64_t k, bool map_used, std::uint64_t dim_a, std::uint64_t dim_b,
           std::optional<std::vector<std::uint64_t>> arch, const std::string& reference) {
          CostParams p;
          if (arch) {
            if (arch->size() != 6) throw InvalidArgument("arch is (L, H, K, F, D, V)");
            const auto& v = *arch;
            p.arch = Architecture{v[0], v[1], v[2], v[3], v[4], v[5]};
          } else {
            const auto a = ArchitecturePreset(preset);
            if (!a) throw InvalidArgument("unknown preset '" + preset + "'");
            p.arch = *a;
          }
          p.prompt_tokens = P;
          p.message_tokens = M;
          p.output_tokens = T;
          p.graft_layer = k;
          p.map_used = map_used;
          p.dim_a = dim_a;
          p.dim_b = dim_b;
          const auto ref = ArchitecturePreset(reference);
          if (!ref) throw InvalidArgument("unknown reference '" + reference + "'");
          const CostReport r = MakeCostReport(p, *ref);
          py::dict d;
          d["nl_flops"] = ToInt(r.nl_flops);
          d["ac_flops"] = ToInt(r.ac_flops);
          d["ratio"] = r.ratio ? py::object(py::float_(*r.ratio)) : py::none();
          d["normalized_nl"] = r.normalized_nl ? py::object(py::float_(*r.normalized_nl)) : py::none();
          d["normalized_ac"] = r.normalized_ac ? py::object(py::float_(*r.normalized_ac)) : py::none();
          return d;
        },
        py::arg("preset") = "toy", py::arg("P") = 256, py::arg("M") = 256, py::arg("T") = 64,
        py::arg("k") = 0, py::arg("map_used") = false, py::arg("dim_a") = 0, py::arg("dim_b") = 0,
        py::arg("arch") = std::nullopt, py::arg("reference") = "llama1b");

  m.def("gen_countries", [](int n, std::uint64_t seed) { return TasksToList(GenCountries(n, seed)); });
  m.def("gen_tipsheets", [](int n, std::uint64_t seed) { return TasksToList(GenTipSheets(n, seed)); });
  m.def("score_exact", &ScoreExact, py::arg("prediction"), py::arg("gold"), py::arg("strict") = false);
  m.def("bootstrap_ci",
        [](const std::vector<double>& scores, int iters, double level, std::uint64_t seed) {
          const EvalReport r = BootstrapCi(scores, iters, level, seed);
          py::dict d;
          d["n"] = r.n;
          d["accuracy"] = r.accuracy;
          d["ci_low"] = r.ci_low;
          d["ci_high"] = r.ci_high;
          d["bootstrap_iters"] = r.bootstrap_iters;
          d["level"] = r.level;
          d["seed"] = r.seed;
          return d;
        },
        py::arg("scores"), py::arg("iters") = 1000, py::arg("level") = 0.95, py::arg("seed") = 0);

  m.def("run_cli", [](const std::vector<std::string>& args) {
    std::ostringstream out, err;
    int code;
    {
      py::gil_scoped_release release;
      code = RunCli(args, out, err);
    }
    return py::make_tuple(code, out.str(), err.str());
  }, "Runs the acomm command line; returns (exit_code, stdout, stderr).");
}
