#ifndef AFFORD_REFNET_MODEL_HPP_
#define AFFORD_REFNET_MODEL_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "afford/core/types.hpp"

namespace afford::refnet {

struct ModelConfig {
  // Each refinement merge produces 15 * k feature maps.
  std::size_t k = 3;
  // Encoder stages; each halves height and width.
  std::size_t depth = 3;
  // Channels of the first encoder stage; doubled at every further stage.
  std::size_t encoder_width = 8;
  std::uint64_t seed = 0;

  std::size_t refine_channels() const { return kNumAffordances * k; }
  // stage in [1, depth]; stage 0 is the RGB input.
  std::size_t encoder_channels(std::size_t stage) const;
  void validate() const;
  // Throws ArgumentError unless height and width are positive multiples of 2^depth.
  void check_input(std::size_t height, std::size_t width) const;
  bool operator==(const ModelConfig&) const = default;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

struct ParamTensor {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> values;
  bool encoder = false;
  bool operator==(const ParamTensor&) const = default;
};

// Filter banks and biases in a fixed order: enc1..encD, decD..dec1, head.
// Also used to hold gradients of the same shapes.
struct ModelParams {
  std::vector<ParamTensor> tensors;

  static ModelParams initialize(const ModelConfig& config);
  static ModelParams zeros(const ModelConfig& config);
  ModelParams zeros_like() const;

  std::size_t parameter_count() const;
  // Stable 64-bit digest of every value; used to detect stale caches.
  std::uint64_t fingerprint() const;
  void set_zero();
  void scale(double factor);
  void add(const ModelParams& other);
  bool operator==(const ModelParams&) const = default;
};

// Activations recorded by forward() for the matching backward().
class ForwardCache {
 public:
  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  // One byte per ReLU input: 1 where the input was > 0. Two forwards with the
  // same pattern lie in the same linear region of the network.
  std::vector<std::uint8_t> relu_pattern() const;

 private:
  friend struct ForwardPass;
  friend struct BackwardPass;

  struct Stage {
    std::size_t channels = 0, height = 0, width = 0;
    std::vector<double> input;       // encoder: stage input; decoder: concat(upsampled, skip)
    std::vector<double> columns;     // im2col of `input`
    std::vector<double> preact;      // conv output before ReLU
    std::vector<double> activation;  // after ReLU
  };

  ModelConfig config_;
  std::uint64_t fingerprint_ = 0;
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<Stage> encoder_;  // index s-1 for stage s
  std::vector<Stage> decoder_;  // index s-1 for the merge at stage s
  std::vector<double> output_;  // sigmoid(head)
};

struct ForwardResult {
  AffordanceTensor output;
  ForwardCache cache;
};

ForwardResult forward(const ModelParams& params, const ModelConfig& config, const RgbRaster& image);
AffordanceTensor predict(const ModelParams& params, const ModelConfig& config, const RgbRaster& image);

struct BackwardResult {
  ModelParams grads;
  std::vector<double> input_grad;  // 3 x H x W
};

// grad_output is dL/d(output), 15 x H x W. Throws ArgumentError if the
// cache came from different parameters or shapes.
BackwardResult backward(const ModelParams& params, const ForwardCache& cache, std::span<const double> grad_output);
// Adds parameter gradients into `grads` (same layout as params).
void backward_accumulate(const ModelParams& params, const ForwardCache& cache, std::span<const double> grad_output,
                         ModelParams& grads, std::vector<double>* input_grad = nullptr);

}  // namespace afford::refnet

#endif  // AFFORD_REFNET_MODEL_HPP_
