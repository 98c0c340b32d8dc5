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
#include <vector>

#include "gesturelm/nn/tensor.hpp"

namespace gesturelm::nn {

struct AdamWConfig {
  Real lr = 1e-3;
  Real beta1 = 0.9;
  Real beta2 = 0.999;
  Real eps = 1e-8;
  Real weight_decay = 0.01;
  Real grad_clip = 1.0;  // global L2 norm; <= 0 disables
};

class AdamW {
 public:
  AdamW(std::vector<Tensor> params, AdamWConfig cfg);

  // Applies one update with learning rate `lr` and clears gradients.
  void step(Real lr);
  void step() { step(cfg_.lr); }
  void zero_grad();
  std::int64_t steps() const { return t_; }
  const AdamWConfig& config() const { return cfg_; }

 private:
  std::vector<Tensor> params_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  AdamWConfig cfg_;
  std::int64_t t_ = 0;
};

// Linear warmup over ratio * total steps, then cosine decay to zero.
class CosineSchedule {
 public:
  CosineSchedule(Real base_lr, std::int64_t total_steps, Real warmup_ratio);
  Real lr(std::int64_t step) const;

 private:
  Real base_;
  std::int64_t total_;
  std::int64_t warmup_;
};

}  // namespace gesturelm::nn
