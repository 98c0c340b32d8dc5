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

#include "gesturelm/nn/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace gesturelm::nn {

AdamW::AdamW(std::vector<Tensor> params, AdamWConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  for (const auto& p : params_) {
    m_.push_back(Matrix::Zero(p.rows(), p.cols()));
    v_.push_back(Matrix::Zero(p.rows(), p.cols()));
  }
}

void AdamW::step(Real lr) {
  ++t_;
  Real scale_grad = 1.0;
  if (cfg_.grad_clip > 0) {
    Real sq = 0;
    for (const auto& p : params_) {
      if (p.has_grad()) sq += p.grad().squaredNorm();
    }
    const Real norm = std::sqrt(sq);
    if (norm > cfg_.grad_clip) scale_grad = cfg_.grad_clip / norm;
  }
  const Real bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<Real>(t_));
  const Real bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<Real>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i];
    if (!p.has_grad()) continue;
    const Matrix g = p.grad() * scale_grad;
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
    Matrix& w = p.mutable_value();
    if (cfg_.weight_decay > 0) w *= (1.0 - lr * cfg_.weight_decay);
    w.array() -= lr * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + cfg_.eps);
  }
  zero_grad();
}

void AdamW::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

CosineSchedule::CosineSchedule(Real base_lr, std::int64_t total_steps, Real warmup_ratio)
    : base_(base_lr),
      total_(std::max<std::int64_t>(1, total_steps)),
      warmup_(static_cast<std::int64_t>(std::ceil(warmup_ratio * static_cast<Real>(total_steps)))) {}

Real CosineSchedule::lr(std::int64_t step) const {
  if (step < warmup_) return base_ * static_cast<Real>(step + 1) / static_cast<Real>(warmup_);
  const Real span = static_cast<Real>(std::max<std::int64_t>(1, total_ - warmup_));
  const Real progress = std::clamp(static_cast<Real>(step - warmup_) / span, 0.0, 1.0);
  return base_ * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

}  // namespace gesturelm::nn
