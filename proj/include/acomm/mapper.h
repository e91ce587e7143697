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

#ifndef ACOMM_MAPPER_H_
#define ACOMM_MAPPER_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "acomm/grafting.h"
#include "acomm/model.h"
#include "acomm/tensor.h"

namespace acomm {

// Paired final-token activations: row i of `inputs` is A's, row i of
// `targets` is B's, for the same sentence.
struct PairDataset {
  Matrix inputs;   // N x d_A
  Matrix targets;  // N x d_B

  int size() const { return inputs.rows(); }
};

struct TrainOptions {
  int epochs = 10;
  int batch_size = 32;
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::uint64_t seed = 0;
};

struct TrainReport {
  // Per-example loss averaged over each epoch, each batch measured before
  // its update.
  std::vector<double> epoch_losses;
  double final_loss = 0.0;           // full-dataset MSE after training
  TrainOptions options;
  int n = 0, dim_in = 0, dim_out = 0;
};

PairDataset CollectPairs(const Model& model_a, const Model& model_b,
                         const std::vector<std::string>& sentences, int k, int j);

// (1/N) sum_i ||z_i - W y_i||^2, accumulated in double.
double MseLoss(const MapMatrix& w, const PairDataset& data);
// (2/N) sum_i (W y_i - z_i) y_i^T, over all rows or over the listed rows
// (N is then the number of listed rows).
Matrix LossGradient(const MapMatrix& w, const PairDataset& data);
Matrix LossGradient(const MapMatrix& w, const PairDataset& data,
                    std::span<const int> rows);

// Xavier-uniform init (bound sqrt(6 / (d_A + d_B))) followed by Adam over
// mini-batches drawn from a fresh seeded shuffle each epoch. The final short
// batch is kept.
struct TrainResult {
  MapMatrix map;
  TrainReport report;
};
TrainResult TrainMap(const PairDataset& data, const TrainOptions& options);

MapMatrix XavierInit(int dim_out, int dim_in, std::uint64_t seed);

// ||Y^T X||_F^2 / (||X||_F^2 ||Y||_F^2). Throws on zero matrices or unequal
// row counts.
double ActivationSimilarity(const Matrix& x, const Matrix& y);

// Map persistence: ACWT file with the single tensor "map.W" and the digests
// of the (A, B) pair it was trained for.
struct MapFile {
  MapMatrix map;
  std::string model_a_digest;
  std::string model_b_digest;
  int source_layer = 0;
  int target_layer = 0;
};
void SaveMap(const std::filesystem::path& path, const MapFile& file,
             const std::string& meta_json = "{}");
MapFile LoadMap(const std::filesystem::path& path);
// Throws InvalidArgument when the map was trained for a different pair.
void CheckMapPairing(const MapFile& file, const Model& model_a, const Model& model_b);

}  // namespace acomm

#endif  // ACOMM_MAPPER_H_
