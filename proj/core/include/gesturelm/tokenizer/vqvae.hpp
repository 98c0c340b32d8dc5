// Copyright 2026 The GestureLM Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "gesturelm/motion/motion.hpp"
#include "gesturelm/motion/skeleton.hpp"
#include "gesturelm/nn/module.hpp"

namespace gesturelm::tokenizer {

using nn::Index;
using nn::Matrix;
using nn::Tensor;

struct LossWeights {
  double rec6d = 1.0;
  double axis_angle = 1.0;
  double joint_pos = 1.0;
  double geodesic = 1.0;
  double codebook = 1.0;
  double velocity = 1.0;
  double acceleration = 1.0;
};

struct TokenizerConfig {
  int codebook_size = 512;   // K
  Index latent_dim = 256;    // d
  int chunks = 8;            // M
  int window = 32;           // N
  int joints = motion::kDefaultJoints;
  double fps = motion::kDefaultFps;
  double beta = 0.25;
  int layers = 2;
  int heads = 2;
  Index ffn_width = 0;       // 0 -> 4 * latent_dim
  // Velocity/acceleration terms on joint positions instead of 6D values.
  bool derivatives_on_positions = false;
  // Velocity/acceleration in per-second units (scaled by fps, fps^2) rather
  // than per-frame differences.
  bool derivatives_per_second = false;
  // Codebook rows start at encoder outputs sampled from the first batches.
  bool data_init_codebook = true;
  LossWeights weights;

  int epochs = 57;
  double lr = 3e-5;
  double weight_decay = 0.01;
  double grad_clip = 1.0;
  int batch_size = 32;
  std::uint64_t seed = 0;

  int frames_per_token() const { return window / chunks; }
  void validate() const;
};

void to_json(nlohmann::json& j, const TokenizerConfig& c);
// Reads keys present in j over the existing values; unknown keys -> UsageError.
void read_config(const nlohmann::json& j, TokenizerConfig& c);

// Reserved ids above the codebook (carried by learned embeddings downstream).
inline int bog_id(int K) { return K; }
inline int eog_id(int K) { return K + 1; }
inline int gmask_id(int K) { return K + 2; }

struct FrameSpan {
  int begin = 0;  // inclusive
  int end = 0;    // exclusive
};

// ids = BOG, interior..., EOG; spans has one entry per interior token.
struct GestureTokenSeq {
  std::vector<int> ids;
  std::vector<FrameSpan> spans;

  std::span<const int> interior() const {
    return ids.size() < 2 ? std::span<const int>() : std::span<const int>(ids).subspan(1, ids.size() - 2);
  }
};

// Contiguous, order-preserving partition of the frames into `chunks` parts.
std::vector<motion::MotionSequence> chunk(const motion::MotionSequence& m, int chunks);

struct Quantized {
  std::vector<int> ids;
  Matrix zq;
};
// Nearest codebook row per latent row by Euclidean distance; ties -> lowest id.
Quantized quantize(const Matrix& z, const Matrix& codebook);

struct LossTerms {
  Tensor rec6d, axis_angle, joint_pos, geodesic, codebook, velocity, acceleration, total;
};

struct LossBreakdown {
  double rec6d = 0, axis_angle = 0, joint_pos = 0, geodesic = 0, codebook = 0, velocity = 0, acceleration = 0,
         total = 0;
  LossBreakdown& operator+=(const LossBreakdown& o);
  LossBreakdown scaled(double s) const;
};
void to_json(nlohmann::json& j, const LossBreakdown& b);

// Value zq, gradient passed to z unchanged: z + sg(zq - z) without rounding.
Tensor straight_through(const Tensor& z, const Matrix& zq);

// ||sg[z] - zq||^2 + beta ||z - sg[zq]||^2, squared norms averaged over rows.
Tensor codebook_loss(const Tensor& z, const Tensor& zq, double beta);

// x, x_hat: [B*N x 6J]; z, zq: [B*M x d] (zq the raw codebook rows, not the
// pass-through value). Components are weighted; total is their sum. Throws
// NumericalError naming the first non-finite component.
LossTerms vqvae_loss(const Tensor& x, const Tensor& x_hat, const Tensor& z, const Tensor& zq,
                     const motion::Skeleton& skeleton, const TokenizerConfig& cfg);
LossBreakdown breakdown(const LossTerms& t);

class VqVae : public nn::Module {
 public:
  VqVae() = default;
  VqVae(const TokenizerConfig& cfg, nn::Rng& rng);

  const TokenizerConfig& config() const { return cfg_; }
  const Tensor& codebook() const { return codebook_; }
  Tensor& codebook() { return codebook_; }

  // [B*N x 6J] -> [B*M x d]
  Tensor encode(const Tensor& frames) const;
  // [B*M x d] -> [B*N x 6J]
  Tensor decode(const Tensor& latents) const;

  struct Forward {
    Tensor z;
    Tensor zq;          // codebook rows (graph to the codebook)
    Tensor pass;        // z + sg(zq - z)
    Tensor x_hat;
    std::vector<int> ids;
  };
  Forward forward(const Tensor& frames) const;

  // Single-window conveniences for inference.
  Matrix encode(const motion::MotionSequence& window) const;
  Quantized quantize(const Matrix& z) const { return tokenizer::quantize(z, codebook_.value()); }
  motion::MotionSequence decode(const Matrix& zq) const;

  void collect_parameters(const std::string& prefix, nn::NamedTensors& out) const override;
  nn::NamedTensors encoder_parameters() const;
  nn::NamedTensors decoder_parameters() const;

  void save(const std::filesystem::path& path, int epoch) const;
  static VqVae load(const std::filesystem::path& path);

 private:
  void check_frames(const Tensor& frames) const;

  TokenizerConfig cfg_;
  nn::Linear frame_in_;
  Tensor enc_pos_;
  nn::TransformerStack encoder_;
  Tensor codebook_;
  Tensor dec_pos_;
  nn::TransformerStack decoder_;
  nn::Linear frame_out_;
};

struct EpochLog {
  int epoch = 0;
  LossBreakdown train;
};

struct TrainResult {
  VqVae model;
  std::vector<EpochLog> log;
};

// windows: motion windows of exactly cfg.window frames and cfg.joints joints.
TrainResult train_tokenizer(const std::vector<motion::MotionSequence>& windows, const TokenizerConfig& cfg,
                            const motion::Skeleton& skeleton,
                            const std::function<void(const EpochLog&)>& on_epoch = {});

// Pads (repeat last frame) to a multiple of N, tokenizes each window and
// wraps the concatenated ids in one BOG/EOG pair. Spans are in padded frames.
GestureTokenSeq tokenize(const motion::MotionSequence& m, const VqVae& model);
// Decodes the interior ids window by window; output has the padded length.
motion::MotionSequence reconstruct(const GestureTokenSeq& tokens, const VqVae& model);

// Windows of exactly N frames covering the (padded) sequence.
std::vector<motion::MotionSequence> windows_of(const motion::MotionSequence& m, int window);

}  // namespace gesturelm::tokenizer
