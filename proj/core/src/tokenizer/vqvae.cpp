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

#include "gesturelm/tokenizer/vqvae.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "gesturelm/config_reader.hpp"
#include "gesturelm/error.hpp"
#include "gesturelm/motion/geometry_ops.hpp"
#include "gesturelm/nn/checkpoint.hpp"
#include "gesturelm/nn/optim.hpp"

namespace gesturelm::tokenizer {

namespace {

std::vector<Index> tiled_positions(Index count, Index length) {
  std::vector<Index> ids(static_cast<std::size_t>(count * length));
  for (Index i = 0; i < count * length; ++i) ids[i] = i % length;
  return ids;
}

Matrix stack_windows(const std::vector<motion::MotionSequence>& windows, std::span<const std::size_t> order) {
  const Index n = windows[order[0]].frames();
  Matrix out(static_cast<Index>(order.size()) * n, windows[order[0]].data().cols());
  for (std::size_t i = 0; i < order.size(); ++i) out.middleRows(static_cast<Index>(i) * n, n) = windows[order[i]].data();
  return out;
}

void check_finite(const Tensor& t, const char* name) {
  if (!std::isfinite(t.item())) throw NumericalError(std::string("vqvae loss component '") + name + "' is not finite");
}

}  // namespace

void TokenizerConfig::validate() const {
  if (codebook_size < 1) throw UsageError("tokenizer.codebook_size must be >= 1");
  if (latent_dim < 1) throw UsageError("tokenizer.latent_dim must be >= 1");
  if (chunks < 1 || window < 1 || window % chunks != 0) {
    throw UsageError("tokenizer.window must be a positive multiple of tokenizer.chunks");
  }
  if (joints < 1) throw UsageError("tokenizer.joints must be >= 1");
  if (!(fps > 0)) throw UsageError("tokenizer.fps must be positive");
  if (beta < 0) throw UsageError("tokenizer.beta must be >= 0");
  if (layers < 0 || heads < 1 || latent_dim % heads != 0) {
    throw UsageError("tokenizer.heads must divide tokenizer.latent_dim");
  }
  if (epochs < 0 || batch_size < 1 || !(lr > 0)) throw UsageError("tokenizer training settings out of range");
}

void to_json(nlohmann::json& j, const TokenizerConfig& c) {
  j = nlohmann::json{{"codebook_size", c.codebook_size},
                     {"latent_dim", c.latent_dim},
                     {"chunks", c.chunks},
                     {"window", c.window},
                     {"joints", c.joints},
                     {"fps", c.fps},
                     {"beta", c.beta},
                     {"layers", c.layers},
                     {"heads", c.heads},
                     {"ffn_width", c.ffn_width},
                     {"derivatives_on_positions", c.derivatives_on_positions},
                     {"derivatives_per_second", c.derivatives_per_second},
                     {"data_init_codebook", c.data_init_codebook},
                     {"weights",
                      {{"rec6d", c.weights.rec6d},
                       {"axis_angle", c.weights.axis_angle},
                       {"joint_pos", c.weights.joint_pos},
                       {"geodesic", c.weights.geodesic},
                       {"codebook", c.weights.codebook},
                       {"velocity", c.weights.velocity},
                       {"acceleration", c.weights.acceleration}}},
                     {"epochs", c.epochs},
                     {"lr", c.lr},
                     {"weight_decay", c.weight_decay},
                     {"grad_clip", c.grad_clip},
                     {"batch_size", c.batch_size},
                     {"seed", c.seed}};
}

void read_config(const nlohmann::json& j, TokenizerConfig& c) {
  ConfigReader r(j, "tokenizer");
  r.get("codebook_size", c.codebook_size);
  r.get("latent_dim", c.latent_dim);
  r.get("chunks", c.chunks);
  r.get("window", c.window);
  r.get("joints", c.joints);
  r.get("fps", c.fps);
  r.get("beta", c.beta);
  r.get("layers", c.layers);
  r.get("heads", c.heads);
  r.get("ffn_width", c.ffn_width);
  r.get("derivatives_on_positions", c.derivatives_on_positions);
  r.get("derivatives_per_second", c.derivatives_per_second);
  r.get("data_init_codebook", c.data_init_codebook);
  const nlohmann::json w = r.child("weights");
  ConfigReader wr(w, "tokenizer.weights");
  wr.get("rec6d", c.weights.rec6d);
  wr.get("axis_angle", c.weights.axis_angle);
  wr.get("joint_pos", c.weights.joint_pos);
  wr.get("geodesic", c.weights.geodesic);
  wr.get("codebook", c.weights.codebook);
  wr.get("velocity", c.weights.velocity);
  wr.get("acceleration", c.weights.acceleration);
  wr.finish();
  r.get("epochs", c.epochs);
  r.get("lr", c.lr);
  r.get("weight_decay", c.weight_decay);
  r.get("grad_clip", c.grad_clip);
  r.get("batch_size", c.batch_size);
  r.get("seed", c.seed);
  r.finish();
}

std::vector<motion::MotionSequence> chunk(const motion::MotionSequence& m, int chunks) {
  if (chunks < 1 || m.frames() % chunks != 0) {
    throw UsageError("cannot split " + std::to_string(m.frames()) + " frames into " + std::to_string(chunks) +
                     " equal chunks");
  }
  const int len = m.frames() / chunks;
  std::vector<motion::MotionSequence> out;
  out.reserve(static_cast<std::size_t>(chunks));
  for (int c = 0; c < chunks; ++c) out.push_back(m.slice(c * len, len));
  return out;
}

Quantized quantize(const Matrix& z, const Matrix& codebook) {
  if (z.cols() != codebook.cols()) throw UsageError("latent width does not match codebook width");
  Quantized q;
  q.ids.resize(static_cast<std::size_t>(z.rows()));
  q.zq.resize(z.rows(), z.cols());
  for (Index i = 0; i < z.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    Index arg = 0;
    for (Index k = 0; k < codebook.rows(); ++k) {
      const double d = (z.row(i) - codebook.row(k)).squaredNorm();
      if (d < best) {
        best = d;
        arg = k;
      }
    }
    q.ids[i] = static_cast<int>(arg);
    q.zq.row(i) = codebook.row(arg);
  }
  return q;
}

LossBreakdown& LossBreakdown::operator+=(const LossBreakdown& o) {
  rec6d += o.rec6d;
  axis_angle += o.axis_angle;
  joint_pos += o.joint_pos;
  geodesic += o.geodesic;
  codebook += o.codebook;
  velocity += o.velocity;
  acceleration += o.acceleration;
  total += o.total;
  return *this;
}

LossBreakdown LossBreakdown::scaled(double s) const {
  LossBreakdown b = *this;
  for (double* v : {&b.rec6d, &b.axis_angle, &b.joint_pos, &b.geodesic, &b.codebook, &b.velocity, &b.acceleration,
                    &b.total}) {
    *v *= s;
  }
  return b;
}

void to_json(nlohmann::json& j, const LossBreakdown& b) {
  j = nlohmann::json{{"rec6d", b.rec6d},       {"axis_angle", b.axis_angle},
                     {"joint_pos", b.joint_pos}, {"geodesic", b.geodesic},
                     {"codebook", b.codebook},   {"velocity", b.velocity},
                     {"acceleration", b.acceleration}, {"total", b.total}};
}

Tensor straight_through(const Tensor& z, const Matrix& zq) {
  if (z.rows() != zq.rows() || z.cols() != zq.cols()) throw UsageError("straight_through: shape mismatch");
  return nn::make_result(zq, {z}, [](nn::Node& n) { n.inputs[0]->accumulate(n.grad); });
}

Tensor codebook_loss(const Tensor& z, const Tensor& zq, double beta) {
  const double d = static_cast<double>(z.cols());
  const Tensor vq = nn::scale(nn::mse(z.detach(), zq), d);
  const Tensor commit = nn::scale(nn::mse(z, zq.detach()), d * beta);
  return nn::add(vq, commit);
}

LossTerms vqvae_loss(const Tensor& x, const Tensor& x_hat, const Tensor& z, const Tensor& zq,
                     const motion::Skeleton& skeleton, const TokenizerConfig& cfg) {
  const Index J = cfg.joints;
  if (x.cols() != 6 * J || x_hat.cols() != 6 * J || x.rows() != x_hat.rows() || x.rows() % cfg.window != 0) {
    throw UsageError("vqvae_loss: motion shapes do not match the config");
  }
  if (z.rows() != zq.rows() || z.cols() != zq.cols()) throw UsageError("vqvae_loss: latent shapes differ");
  if (static_cast<Index>(skeleton.size()) != J) throw UsageError("vqvae_loss: skeleton joint count mismatch");
  const auto& w = cfg.weights;
  const Index rows = x.rows() * J;

  LossTerms t;
  t.rec6d = nn::scale(nn::mse(x_hat, x), w.rec6d);

  const Tensor R_hat = motion::sixd_to_rotmat_rows(nn::reshape(x_hat, rows, 6));
  const Tensor R = motion::sixd_to_rotmat_rows(nn::reshape(x, rows, 6));
  t.axis_angle = nn::scale(nn::mse(motion::rotvec_rows(R_hat), motion::rotvec_rows(R)), w.axis_angle);
  const Tensor P_hat = motion::forward_kinematics_rows(R_hat, skeleton);
  const Tensor P = motion::forward_kinematics_rows(R, skeleton);
  t.joint_pos = nn::scale(nn::mse(P_hat, P), w.joint_pos);
  t.geodesic = nn::scale(nn::mean(motion::geodesic_rows(R_hat, R)), w.geodesic);

  t.codebook = nn::scale(codebook_loss(z, zq, cfg.beta), w.codebook);

  Tensor seq = x, seq_hat = x_hat;
  if (cfg.derivatives_on_positions) {
    seq = nn::reshape(P, x.rows(), 3 * J);
    seq_hat = nn::reshape(P_hat, x.rows(), 3 * J);
  }
  const Index N = cfg.window;
  const double rate = cfg.derivatives_per_second ? cfg.fps : 1.0;
  const Tensor v = motion::frame_difference_rows(seq, N, rate);
  const Tensor v_hat = motion::frame_difference_rows(seq_hat, N, rate);
  t.velocity = nn::scale(nn::mse(v_hat, v), w.velocity);
  if (N > 2) {
    const Tensor a = motion::frame_difference_rows(v, N - 1, rate);
    const Tensor a_hat = motion::frame_difference_rows(v_hat, N - 1, rate);
    t.acceleration = nn::scale(nn::mse(a_hat, a), w.acceleration);
  } else {
    t.acceleration = Tensor::scalar(0.0);
  }

  check_finite(t.rec6d, "rec6d");
  check_finite(t.axis_angle, "axis_angle");
  check_finite(t.joint_pos, "joint_pos");
  check_finite(t.geodesic, "geodesic");
  check_finite(t.codebook, "codebook");
  check_finite(t.velocity, "velocity");
  check_finite(t.acceleration, "acceleration");
  t.total = nn::add(nn::add(nn::add(t.rec6d, t.axis_angle), nn::add(t.joint_pos, t.geodesic)),
                    nn::add(nn::add(t.codebook, t.velocity), t.acceleration));
  return t;
}

LossBreakdown breakdown(const LossTerms& t) {
  return {t.rec6d.item(),    t.axis_angle.item(), t.joint_pos.item(),    t.geodesic.item(),
          t.codebook.item(), t.velocity.item(),   t.acceleration.item(), t.total.item()};
}

VqVae::VqVae(const TokenizerConfig& cfg, nn::Rng& rng) : cfg_(cfg) {
  cfg_.validate();
  const Index d = cfg_.latent_dim;
  const Index in = 6 * static_cast<Index>(cfg_.joints);
  const nn::TransformerConfig tc{d, cfg_.heads, cfg_.layers, cfg_.ffn_width > 0 ? cfg_.ffn_width : 4 * d};
  frame_in_ = nn::Linear(in, d, rng);
  enc_pos_ = Tensor(nn::normal_matrix(cfg_.window, d, 0.02, rng), true);
  encoder_ = nn::TransformerStack(tc, rng);
  codebook_ = Tensor(nn::normal_matrix(cfg_.codebook_size, d, 1.0, rng), true);
  dec_pos_ = Tensor(nn::normal_matrix(cfg_.window, d, 0.02, rng), true);
  decoder_ = nn::TransformerStack(tc, rng);
  frame_out_ = nn::Linear(d, in, rng);
  // Start the decoder at the rest pose.
  Tensor bias = frame_out_.bias();
  for (Index j = 0; j < cfg_.joints; ++j) {
    bias.mutable_value()(0, 6 * j + 0) = 1.0;
    bias.mutable_value()(0, 6 * j + 4) = 1.0;
  }
}

void VqVae::check_frames(const Tensor& frames) const {
  if (frames.cols() != 6 * static_cast<Index>(cfg_.joints) || frames.rows() == 0 || frames.rows() % cfg_.window != 0) {
    throw UsageError("tokenizer expects [B*" + std::to_string(cfg_.window) + " x " + std::to_string(6 * cfg_.joints) +
                     "] frames, got [" + std::to_string(frames.rows()) + " x " + std::to_string(frames.cols()) + "]");
  }
}

Tensor VqVae::encode(const Tensor& frames) const {
  check_frames(frames);
  const Index B = frames.rows() / cfg_.window;
  const auto pos = tiled_positions(B, cfg_.window);
  Tensor h = nn::add(frame_in_.forward(frames), nn::gather_rows(enc_pos_, pos));
  h = encoder_.forward(h, nn::SeqLayout::uniform(B, cfg_.window));
  return nn::mean_pool_rows(h, cfg_.frames_per_token());
}

Tensor VqVae::decode(const Tensor& latents) const {
  if (latents.cols() != cfg_.latent_dim || latents.rows() == 0 || latents.rows() % cfg_.chunks != 0) {
    throw UsageError("tokenizer decode expects [B*" + std::to_string(cfg_.chunks) + " x " +
                     std::to_string(cfg_.latent_dim) + "] latents");
  }
  const Index B = latents.rows() / cfg_.chunks;
  const auto pos = tiled_positions(B, cfg_.window);
  Tensor h = nn::add(nn::repeat_rows(latents, cfg_.frames_per_token()), nn::gather_rows(dec_pos_, pos));
  h = decoder_.forward(h, nn::SeqLayout::uniform(B, cfg_.window));
  return frame_out_.forward(h);
}

VqVae::Forward VqVae::forward(const Tensor& frames) const {
  Forward f;
  f.z = encode(frames);
  Quantized q = tokenizer::quantize(f.z.value(), codebook_.value());
  std::vector<Index> rows(q.ids.begin(), q.ids.end());
  f.zq = nn::gather_rows(codebook_, rows);
  f.pass = straight_through(f.z, q.zq);
  f.x_hat = decode(f.pass);
  f.ids = std::move(q.ids);
  return f;
}

Matrix VqVae::encode(const motion::MotionSequence& window) const {
  if (window.joints() != cfg_.joints || window.frames() != cfg_.window) {
    throw UsageError("motion window must be " + std::to_string(cfg_.window) + " frames of " +
                     std::to_string(cfg_.joints) + " joints");
  }
  nn::NoGradGuard guard;
  return encode(Tensor(window.data())).value();
}

motion::MotionSequence VqVae::decode(const Matrix& zq) const {
  nn::NoGradGuard guard;
  return motion::MotionSequence(decode(Tensor(zq)).value(), cfg_.joints, cfg_.fps);
}

void VqVae::collect_parameters(const std::string& prefix, nn::NamedTensors& out) const {
  frame_in_.collect_parameters(prefix + "encoder.frame_in.", out);
  out.emplace_back(prefix + "encoder.pos", enc_pos_);
  encoder_.collect_parameters(prefix + "encoder.stack.", out);
  out.emplace_back(prefix + "codebook", codebook_);
  out.emplace_back(prefix + "decoder.pos", dec_pos_);
  decoder_.collect_parameters(prefix + "decoder.stack.", out);
  frame_out_.collect_parameters(prefix + "decoder.frame_out.", out);
}

nn::NamedTensors VqVae::encoder_parameters() const {
  nn::NamedTensors out;
  frame_in_.collect_parameters("encoder.frame_in.", out);
  out.emplace_back("encoder.pos", enc_pos_);
  encoder_.collect_parameters("encoder.stack.", out);
  return out;
}

nn::NamedTensors VqVae::decoder_parameters() const {
  nn::NamedTensors out;
  out.emplace_back("decoder.pos", dec_pos_);
  decoder_.collect_parameters("decoder.stack.", out);
  frame_out_.collect_parameters("decoder.frame_out.", out);
  return out;
}

void VqVae::save(const std::filesystem::path& path, int epoch) const {
  nlohmann::json meta;
  meta["kind"] = "gesture_tokenizer";
  meta["config"] = cfg_;
  meta["epoch"] = epoch;
  meta["K"] = cfg_.codebook_size;
  meta["d"] = cfg_.latent_dim;
  meta["M"] = cfg_.chunks;
  meta["N"] = cfg_.window;
  meta["J"] = cfg_.joints;
  meta["fps"] = cfg_.fps;
  meta["beta"] = cfg_.beta;
  meta["layers"] = cfg_.layers;
  meta["seed"] = cfg_.seed;
  nn::save_checkpoint(path, named_parameters(), meta);
}

VqVae VqVae::load(const std::filesystem::path& path) {
  const nlohmann::json meta = nn::load_metadata(path);
  if (meta.value("kind", "") != "gesture_tokenizer") throw DataError(path.string() + " is not a tokenizer checkpoint");
  TokenizerConfig cfg;
  read_config(meta.at("config"), cfg);
  nn::Rng rng(cfg.seed);
  VqVae model(cfg, rng);
  nn::assign_parameters(model.named_parameters(), nn::load_tensors(path));
  return model;
}

TrainResult train_tokenizer(const std::vector<motion::MotionSequence>& windows, const TokenizerConfig& cfg,
                            const motion::Skeleton& skeleton, const std::function<void(const EpochLog&)>& on_epoch) {
  if (windows.empty()) throw DataError("tokenizer training set is empty");
  cfg.validate();
  for (const auto& w : windows) {
    if (w.frames() != cfg.window || w.joints() != cfg.joints) {
      throw DataError("tokenizer training windows must be " + std::to_string(cfg.window) + " frames x " +
                      std::to_string(cfg.joints) + " joints");
    }
  }
  nn::Rng rng(cfg.seed);
  TrainResult result{VqVae(cfg, rng), {}};
  VqVae& model = result.model;

  std::vector<std::size_t> order(windows.size());
  std::iota(order.begin(), order.end(), 0);

  if (cfg.data_init_codebook) {
    Matrix z;
    {
      nn::NoGradGuard guard;
      const std::size_t take = std::min<std::size_t>(windows.size(), 256);
      z = model.encode(Tensor(stack_windows(windows, std::span(order).first(take)))).value();
    }
    std::uniform_int_distribution<Index> pick(0, z.rows() - 1);
    std::normal_distribution<double> jitter(0.0, 1e-2);
    Matrix& cb = model.codebook().mutable_value();
    for (Index k = 0; k < cb.rows(); ++k) {
      cb.row(k) = z.row(pick(rng));
      for (Index c = 0; c < cb.cols(); ++c) cb(k, c) += jitter(rng);
    }
  }

  nn::AdamW opt(model.parameters(true),
                {.lr = cfg.lr, .weight_decay = cfg.weight_decay, .grad_clip = cfg.grad_clip});
  const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    LossBreakdown sum;
    for (std::size_t b = 0; b < order.size(); b += bs) {
      const auto batch = std::span(order).subspan(b, std::min(bs, order.size() - b));
      const Tensor x(stack_windows(windows, batch));
      const auto f = model.forward(x);
      const LossTerms terms = vqvae_loss(x, f.x_hat, f.z, f.zq, skeleton, cfg);
      terms.total.backward();
      opt.step();
      sum += breakdown(terms).scaled(static_cast<double>(batch.size()));
    }
    EpochLog log{epoch, sum.scaled(1.0 / static_cast<double>(order.size()))};
    result.log.push_back(log);
    if (on_epoch) on_epoch(log);
  }
  return result;
}

std::vector<motion::MotionSequence> windows_of(const motion::MotionSequence& m, int window) {
  const motion::MotionSequence padded = m.padded_to_multiple(window);
  std::vector<motion::MotionSequence> out;
  for (int f = 0; f < padded.frames(); f += window) out.push_back(padded.slice(f, window));
  return out;
}

GestureTokenSeq tokenize(const motion::MotionSequence& m, const VqVae& model) {
  const auto& cfg = model.config();
  if (m.joints() != cfg.joints) throw UsageError("motion joint count does not match the tokenizer checkpoint");
  if (std::abs(m.fps() - cfg.fps) > 1e-9) throw UsageError("motion fps does not match the tokenizer checkpoint");
  GestureTokenSeq out;
  out.ids.push_back(bog_id(cfg.codebook_size));
  const int span = cfg.frames_per_token();
  int frame = 0;
  for (const auto& w : windows_of(m, cfg.window)) {
    const Quantized q = model.quantize(model.encode(w));
    for (int id : q.ids) {
      out.ids.push_back(id);
      out.spans.push_back({frame, frame + span});
      frame += span;
    }
  }
  out.ids.push_back(eog_id(cfg.codebook_size));
  return out;
}

motion::MotionSequence reconstruct(const GestureTokenSeq& tokens, const VqVae& model) {
  const auto& cfg = model.config();
  const auto ids = tokens.interior();
  if (ids.empty() || ids.size() % static_cast<std::size_t>(cfg.chunks) != 0) {
    throw UsageError("token count is not a whole number of windows");
  }
  std::vector<Index> rows;
  for (int id : ids) {
    if (id < 0 || id >= cfg.codebook_size) throw UsageError("interior gesture id out of codebook range");
    rows.push_back(id);
  }
  nn::NoGradGuard guard;
  const Tensor zq = nn::gather_rows(model.codebook(), rows);
  return motion::MotionSequence(model.decode(zq).value(), cfg.joints, cfg.fps);
}

}  // namespace gesturelm::tokenizer
