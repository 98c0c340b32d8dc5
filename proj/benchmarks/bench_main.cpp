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


#include <random>
#include <string>
#include <vector>

#include <benchmark/benchmark.h>

#include "gesturelm/alignment/pairing.hpp"
#include "gesturelm/lm/model.hpp"
#include "gesturelm/motion/rotation.hpp"
#include "gesturelm/nn/ops.hpp"
#include "gesturelm/tokenizer/vqvae.hpp"

namespace {

using namespace gesturelm;
using nn::Index;
using nn::Matrix;
using nn::Tensor;

Matrix gaussian(Index r, Index c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

void BM_SixdToRotmat(benchmark::State& state) {
  const Matrix in = gaussian(1024, 6, 1);
  for (auto _ : state) {
    for (Index i = 0; i < in.rows(); ++i) {
      motion::Rotation6D r;
      for (int k = 0; k < 6; ++k) r.values[k] = in(i, k);
      benchmark::DoNotOptimize(motion::sixd_to_rotmat(r));
    }
  }
  state.SetItemsProcessed(state.iterations() * in.rows());
}
BENCHMARK(BM_SixdToRotmat);

void BM_Quantize(benchmark::State& state) {
  const Index K = state.range(0);
  const Matrix codebook = gaussian(K, 64, 2);
  const Matrix z = gaussian(256, 64, 3);
  for (auto _ : state) benchmark::DoNotOptimize(tokenizer::quantize(z, codebook));
  state.SetItemsProcessed(state.iterations() * z.rows());
}
BENCHMARK(BM_Quantize)->Arg(128)->Arg(512);

tokenizer::TokenizerConfig desk_tokenizer() {
  tokenizer::TokenizerConfig c;
  c.codebook_size = 128;
  c.latent_dim = 64;
  c.ffn_width = 128;
  return c;
}

void BM_TokenizerForward(benchmark::State& state) {
  const auto cfg = desk_tokenizer();
  nn::Rng rng(4);
  tokenizer::VqVae model(cfg, rng);
  const Index batch = state.range(0);
  Matrix frames(batch * cfg.window, 6 * cfg.joints);
  for (Index f = 0; f < frames.rows(); ++f)
    for (int j = 0; j < cfg.joints; ++j) frames.block(f, 6 * j, 1, 6) << 1, 0, 0, 0, 1, 0;
  const Tensor x(frames);
  nn::NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(model.forward(x));
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_TokenizerForward)->Arg(1)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_LmTrainStep(benchmark::State& state) {
  std::vector<std::string> words;
  for (int i = 0; i < 200; ++i) words.push_back("w" + std::to_string(i));
  std::string text;
  for (const auto& w : words) text += w + " ";
  const auto vocab = lm::build_vocab({text}, {});
  lm::LmConfig lc;
  lc.hidden = 64;
  lc.layers = 2;
  lc.heads = 4;
  lc.ffn_width = 256;
  lc.max_positions = 64;
  nn::Rng rng(5);
  lm::MaskedLM model(lc, vocab, rng);
  const Index batch = 32, len = 24;
  std::mt19937_64 g(6);
  std::vector<Index> ids, positions, targets;
  for (Index b = 0; b < batch; ++b)
    for (Index t = 0; t < len; ++t) {
      ids.push_back(static_cast<Index>(5 + g() % 200));
      positions.push_back(t);
      targets.push_back(ids.back());
    }
  const auto layout = nn::SeqLayout::uniform(batch, len);
  for (auto _ : state) {
    model.zero_grad();
    const Tensor logits = model.lm_logits(model.forward(model.embed(ids, positions), layout));
    nn::cross_entropy(logits, targets).backward();
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_LmTrainStep)->Unit(benchmark::kMillisecond);

void BM_AssignPositions(benchmark::State& state) {
  alignment::TimedTranscript t;
  for (int i = 0; i < 40; ++i) t.words.push_back({"word" + std::to_string(i), 0.3 * i, 0.3 * (i + 1)});
  std::vector<tokenizer::FrameSpan> spans;
  for (int f = 0; f + 4 <= 180; f += 4) spans.push_back({f, f + 4});
  const lm::Vocab vocab;
  for (auto _ : state) benchmark::DoNotOptimize(alignment::assign_positions(t, spans, 15.0, vocab));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(spans.size()));
}
BENCHMARK(BM_AssignPositions);

}  // namespace

BENCHMARK_MAIN();
