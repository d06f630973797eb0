#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>

#include "afford/core/errors.hpp"
#include "afford/refnet/checkpoint.hpp"
#include "afford/refnet/model.hpp"
#include "afford/refnet/optimizer.hpp"
#include "afford/refnet/train.hpp"
#include "support/oracles.hpp"

using namespace afford;
using namespace afford::refnet;

namespace {

ModelConfig small_config(std::size_t k = 1, std::uint64_t seed = 3) {
  ModelConfig c;
  c.k = k;
  c.depth = 2;
  c.encoder_width = 2;
  c.seed = seed;
  return c;
}

mapgen::Sample random_sample(Rng& rng, std::size_t h, std::size_t w, double mask_p = 0.7) {
  return {testing::random_image(rng, h, w), testing::random_soft_target(rng, h, w),
          testing::random_mask(rng, h, w, mask_p), "s"};
}

}  // namespace

TEST_CASE("forward shape and range") {
  const auto config = small_config(3);
  const auto params = ModelParams::initialize(config);
  Rng rng(1);
  const auto out = predict(params, config, testing::random_image(rng, 16, 12));
  CHECK(out.height() == 16);
  CHECK(out.width() == 12);
  for (double v : out.values()) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
  CHECK_THROWS_AS(predict(params, config, RgbRaster(10, 12)), ArgumentError);
}

TEST_CASE("all-zero weights give 0.5 everywhere") {
  const auto config = small_config();
  const auto params = ModelParams::zeros(config);
  Rng rng(2);
  for (double v : predict(params, config, testing::random_image(rng, 8, 8)).values()) CHECK(v == 0.5);
}

TEST_CASE("initialization and forward are deterministic") {
  const auto config = small_config(2, 11);
  CHECK(ModelParams::initialize(config) == ModelParams::initialize(config));
  CHECK(ModelParams::initialize(config) != ModelParams::initialize(small_config(2, 12)));
  Rng rng(3);
  const auto img = testing::random_image(rng, 8, 8);
  const auto params = ModelParams::initialize(config);
  CHECK(predict(params, config, img) == predict(params, config, img));
}

TEST_CASE("k changes the refinement width only") {
  const auto p3 = ModelParams::zeros(small_config(3));
  const auto p5 = ModelParams::zeros(small_config(5));
  CHECK(p3.tensors.size() == p5.tensors.size());
  CHECK(p5.parameter_count() > p3.parameter_count());
  for (std::size_t i = 0; i < p3.tensors.size(); ++i) {
    if (p3.tensors[i].encoder) CHECK(p3.tensors[i].shape == p5.tensors[i].shape);
  }
}

TEST_CASE("parameter gradients match central differences") {
  const auto config = small_config(1, 5);
  Rng rng(4);
  auto params = ModelParams::initialize(config);
  const auto img = testing::random_image(rng, 16, 16);
  std::vector<double> weights(kNumAffordances * 256);
  for (auto& w : weights) w = rng.uniform(-1.0, 1.0);
  const auto objective = [&](const ModelParams& p) {
    const auto out = predict(p, config, img);
    double s = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) s += weights[i] * out.values()[i];
    return s;
  };
  const auto fwd = forward(params, config, img);
  const auto pattern = fwd.cache.relu_pattern();
  const auto grads = backward(params, fwd.cache, weights).grads;

  std::size_t checked = 0, skipped = 0;
  double worst = 0.0;
  for (std::size_t t = 0; t < params.tensors.size(); ++t) {
    auto& values = params.tensors[t].values;
    std::size_t layer_checked = 0;
    for (int trial = 0; trial < 200 && layer_checked < 20; ++trial) {
      const std::size_t j = rng.below(values.size());
      const double saved = values[j];
      bool same_region = true;
      const auto f = [&](double v) {
        values[j] = v;
        same_region = same_region && forward(params, config, img).cache.relu_pattern() == pattern;
        const double out = objective(params);
        values[j] = saved;
        return out;
      };
      const double numeric = testing::central_difference(f, saved, 1e-5);
      if (!same_region) {
        ++skipped;
        continue;
      }
      worst = std::max(worst, testing::relative_error(grads.tensors[t].values[j], numeric, 1e-7));
      ++layer_checked;
    }
    CHECK_MESSAGE(layer_checked == 20, params.tensors[t].name);
    checked += layer_checked;
  }
  CHECK(skipped < checked);
  CHECK(worst < 1e-4);
}

TEST_CASE("zero output gradient gives zero parameter gradient") {
  const auto config = small_config();
  const auto params = ModelParams::initialize(config);
  Rng rng(6);
  const auto fwd = forward(params, config, testing::random_image(rng, 8, 8));
  const std::vector<double> zero(kNumAffordances * 64, 0.0);
  const auto res = backward(params, fwd.cache, zero);
  for (const auto& t : res.grads.tensors)
    for (double v : t.values) CHECK(v == 0.0);
  const auto other = ModelParams::initialize(small_config(1, 99));
  CHECK_THROWS_AS(backward(other, fwd.cache, zero), ArgumentError);
}

TEST_CASE("rmsprop single step") {
  ModelParams params;
  params.tensors.push_back({"w", {1}, {0.0}, false});
  ModelParams grads;
  grads.tensors.push_back({"w", {1}, {1.0}, false});
  auto state = OptimizerState::for_params(params, 1e-3, 0.9, 1e-8);
  rmsprop_step(params, grads, state, nothing_frozen(params));
  CHECK(state.mean_square[0][0] == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(params.tensors[0].values[0] == doctest::Approx(-0.0031623).epsilon(1e-4));
}

TEST_CASE("frozen encoder is bit-identical after training") {
  const auto config = small_config(1, 8);
  Rng rng(7);
  std::vector<mapgen::Sample> set;
  for (int i = 0; i < 4; ++i) set.push_back(random_sample(rng, 8, 8));
  TrainConfig tc;
  tc.epochs_max = 3;
  tc.batch_size = 2;
  tc.encoder_train = false;
  tc.learning_rate = 1e-2;
  const auto init = ModelParams::initialize(config);
  const auto result = train(config, set, set, tc);
  bool decoder_moved = false;
  for (std::size_t i = 0; i < init.tensors.size(); ++i) {
    if (init.tensors[i].encoder)
      CHECK(result.best.tensors[i].values == init.tensors[i].values);
    else
      decoder_moved = decoder_moved || result.best.tensors[i].values != init.tensors[i].values;
  }
  CHECK(decoder_moved);
}

TEST_CASE("early stopping on a scripted loss sequence") {
  const std::vector<double> val = {0.5, 0.4, 0.41, 0.42, 0.43, 0.44, 0.45, 0.46, 0.47};
  std::vector<std::size_t> improved;
  const auto res = run_with_early_stopping(
      20, 5, [&](std::size_t e) { return EpochLosses{1.0, val[e - 1]}; },
      [&](std::size_t e) { improved.push_back(e); });
  CHECK(res.history.size() == 7);
  CHECK(res.best_epoch == 2);
  CHECK(res.stopped_early);
  CHECK(improved == std::vector<std::size_t>{1, 2});

  const auto full = run_with_early_stopping(
      3, 5, [&](std::size_t e) { return EpochLosses{1.0, val[e - 1]}; }, [](std::size_t) {});
  CHECK(full.history.size() == 3);
  CHECK_FALSE(full.stopped_early);

  const auto nan = run_with_early_stopping(
      10, 2, [](std::size_t) { return EpochLosses{1.0, std::nan("")}; }, [](std::size_t) {});
  CHECK(nan.best_epoch == 0);
  CHECK(nan.history.size() == 2);
}

TEST_CASE("checkpoint round trip and errors") {
  for (std::size_t k : {3u, 5u}) {
    const auto config = small_config(k, 21);
    const auto params = ModelParams::initialize(config);
    const auto bytes = encode_checkpoint(config, params);
    const auto back = decode_checkpoint(bytes);
    CHECK(back.config == config);
    CHECK(back.params == params);
  }
  const auto config = small_config(3, 21);
  const auto bytes = encode_checkpoint(config, ModelParams::initialize(config));
  SUBCASE("bad magic") {
    auto b = bytes;
    b[0] = 'X';
    try {
      decode_checkpoint(b);
      FAIL("expected a format error");
    } catch (const FormatError& e) {
      CHECK(e.offset() == 0);
    }
  }
  SUBCASE("truncated") {
    auto b = bytes;
    b.resize(b.size() - 3);
    CHECK_THROWS_AS(decode_checkpoint(b), FormatError);
    b.resize(6);
    CHECK_THROWS_AS(decode_checkpoint(b), FormatError);
  }
  SUBCASE("non-finite payload") {
    auto b = bytes;
    const double nan = std::nan("");
    std::uint8_t raw[8];
    std::memcpy(raw, &nan, 8);
    std::copy(raw, raw + 8, b.end() - 8);
    CHECK_THROWS_AS(decode_checkpoint(b), FormatError);
  }
  SUBCASE("non-finite params are not encoded") {
    auto p = ModelParams::initialize(config);
    p.tensors[0].values[0] = INFINITY;
    CHECK_THROWS_AS(encode_checkpoint(config, p), ValidationError);
  }
  SUBCASE("missing file") { CHECK_THROWS_AS(load_checkpoint("/nonexistent/x.afpw"), IoError); }
}

TEST_CASE("overfits a single image") {
  ModelConfig config;
  config.k = 3;
  config.depth = 3;
  config.encoder_width = 8;
  config.seed = 1;
  Rng rng(31);
  mapgen::Sample s{testing::random_image(rng, 32, 32), AffordanceTensor(32, 32), CoverageMask(32, 32, 1), "one"};
  // Left half one set of affordances, right half another.
  for (std::size_t r = 0; r < 32; ++r)
    for (std::size_t c = 0; c < 32; ++c) s.target.at(c < 16 ? 3 : 14, r, c) = 1.0;
  TrainConfig tc;
  tc.epochs_max = 500;
  tc.patience = 500;
  tc.batch_size = 1;
  tc.learning_rate = 1e-3;
  const auto res = train(config, {s}, {s}, tc);
  CHECK(res.history.front().train_loss > 0.5);
  CHECK(evaluate_loss(res.best, config, {s}, LossMode::kMasked) < 0.05);
}

TEST_CASE("training is deterministic") {
  const auto config = small_config(1, 13);
  Rng rng(9);
  std::vector<mapgen::Sample> set;
  for (int i = 0; i < 5; ++i) set.push_back(random_sample(rng, 8, 8));
  TrainConfig tc;
  tc.epochs_max = 2;
  tc.batch_size = 2;
  tc.seed = 4;
  const auto a = train(config, set, set, tc);
  const auto b = train(config, set, set, tc);
  CHECK(a.best == b.best);
  CHECK(a.history == b.history);
}

TEST_CASE("training input validation") {
  const auto config = small_config();
  Rng rng(10);
  std::vector<mapgen::Sample> set = {random_sample(rng, 8, 8), random_sample(rng, 8, 12)};
  TrainConfig tc;
  tc.epochs_max = 1;
  CHECK_THROWS_AS(train(config, set, set, tc), ArgumentError);
  CHECK_THROWS_AS(train(config, {}, {}, tc), ArgumentError);
  tc.patience = 0;
  CHECK_THROWS_AS(tc.validate(), ArgumentError);
}

TEST_CASE("a batch with all-zero masks leaves parameters unchanged") {
  const auto config = small_config(1, 17);
  Rng rng(12);
  std::vector<mapgen::Sample> set = {random_sample(rng, 8, 8, 0.0), random_sample(rng, 8, 8, 0.0)};
  TrainConfig tc;
  tc.epochs_max = 2;
  tc.batch_size = 2;
  const auto res = train(config, set, set, tc);
  CHECK(res.best == ModelParams::initialize(config));
  for (const auto& r : res.history) CHECK(r.train_loss == 0.0);
}
