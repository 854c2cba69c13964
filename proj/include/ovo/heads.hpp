#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "ovo/volume.hpp"

namespace ovo {

enum class Activation : std::uint8_t { identity, relu };

std::string activation_name(Activation a);
Activation activation_from_name(const std::string& name);

/// One affine stage: y = act(W x + b), W is out x in.
struct DenseLayer {
  Eigen::MatrixXd weight;
  Eigen::VectorXd bias;
  Activation activation = Activation::identity;

  int input_dim() const { return static_cast<int>(weight.cols()); }
  int output_dim() const { return static_cast<int>(weight.rows()); }
};

/// Per-parameter gradient accumulators shaped exactly like a layer stack.
struct GradientBuffer {
  std::vector<Eigen::MatrixXd> weight;
  std::vector<Eigen::VectorXd> bias;

  static GradientBuffer like(const std::vector<DenseLayer>& layers);
  void set_zero();
  void add_scaled(const GradientBuffer& other, double scale);
  Eigen::Index parameter_count() const;
  /// Row-major weight entries then bias, layer by layer.
  Eigen::VectorXd flattened() const;
};

/// Trainable feature-space alignment map: a chain of affine layers with
/// identity/relu activations taking backbone features into the teacher
/// embedding dimension.
class AlignmentHead {
 public:
  AlignmentHead() = default;
  explicit AlignmentHead(std::vector<DenseLayer> layers);

  /// Builds a head with the given dims; hidden layers use relu, the final
  /// layer is linear. Weights start at zero until initialize() is called.
  static AlignmentHead with_dims(int input_dim, const std::vector<int>& hidden_dims,
                                 int output_dim);
  static AlignmentHead identity_head(int dim);

  const std::vector<DenseLayer>& layers() const { return layers_; }
  bool empty() const { return layers_.empty(); }
  int input_dim() const;
  int output_dim() const;

  /// Seeded uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
  void initialize(std::mt19937_64& rng);

  struct Cache {
    std::vector<Eigen::MatrixXd> inputs;    // input to each layer
    std::vector<Eigen::MatrixXd> preacts;   // W x + b before activation
  };

  /// Rows of `features` are samples. Throws "head/input dimension mismatch".
  Eigen::MatrixXd forward(const Eigen::Ref<const Eigen::MatrixXd>& features) const;
  Eigen::MatrixXd forward_cached(const Eigen::Ref<const Eigen::MatrixXd>& features,
                                 Cache& cache) const;

  /// Exact reverse-mode pass. Accumulates parameter gradients into `grads`
  /// (which must be shaped like this head) and returns the gradient with
  /// respect to the forward input.
  Eigen::MatrixXd backward(const Cache& cache,
                           const Eigen::Ref<const Eigen::MatrixXd>& upstream,
                           GradientBuffer& grads) const;

  Eigen::Index parameter_count() const;
  Eigen::VectorXd parameters() const;
  void set_parameters(const Eigen::Ref<const Eigen::VectorXd>& flat);

 private:
  std::vector<DenseLayer> layers_;
};

/// Corner-aligned bilinear resize of a per-pixel feature map; constant
/// fields are preserved exactly.
FeatureMap bilinear_resize(const FeatureMap& src, int target_width, int target_height);

/// Adjoint of bilinear_resize: scatters target-space gradients back onto
/// the source lattice.
Eigen::MatrixXd bilinear_resize_backward(const Eigen::Ref<const Eigen::MatrixXd>& upstream,
                                         int src_width, int src_height, int target_width,
                                         int target_height);

struct FusionGradients {
  GradientBuffer projections;
  GradientBuffer mixer;

  void set_zero();
  void add_scaled(const FusionGradients& other, double scale);
  Eigen::Index parameter_count() const;
  Eigen::VectorXd flattened() const;
};

/// Multi-scale 2D distillation head: five per-level linear projections,
/// bilinear upsampling of every level to the target resolution,
/// channel concatenation, then a per-pixel mixer MLP down to the teacher
/// dimension.
class MultiScaleFusion2D {
 public:
  static constexpr int kLevels = 5;
  /// Level l of the input pyramid is the stride-2^l resolution.
  static constexpr std::array<int, kLevels> kStrides = {1, 2, 4, 8, 16};

  MultiScaleFusion2D() = default;
  MultiScaleFusion2D(std::vector<DenseLayer> scale_projections, AlignmentHead mixer);

  static MultiScaleFusion2D with_dims(int input_channels, int projected_channels,
                                      int mixer_hidden, int output_channels);

  const std::vector<DenseLayer>& scale_projections() const { return projections_; }
  const AlignmentHead& mixer() const { return mixer_; }
  int input_channels() const { return projections_.empty() ? 0 : projections_[0].input_dim(); }
  int output_channels() const { return mixer_.output_dim(); }

  void initialize(std::mt19937_64& rng);

  struct Cache {
    std::array<Eigen::MatrixXd, kLevels> level_inputs;
    std::array<std::pair<int, int>, kLevels> level_dims;  // (width, height)
    AlignmentHead::Cache mixer_cache;
    int target_width = 0;
    int target_height = 0;
  };

  FeatureMap forward(const std::array<FeatureMap, kLevels>& pyramid, int target_width,
                     int target_height) const;
  FeatureMap forward_cached(const std::array<FeatureMap, kLevels>& pyramid, int target_width,
                            int target_height, Cache& cache) const;
  void backward(const Cache& cache, const Eigen::Ref<const Eigen::MatrixXd>& upstream,
                FusionGradients& grads) const;

  Eigen::Index parameter_count() const;
  Eigen::VectorXd parameters() const;
  void set_parameters(const Eigen::Ref<const Eigen::VectorXd>& flat);

 private:
  std::vector<DenseLayer> projections_;
  AlignmentHead mixer_;
};

/// Downsamples a feature map by block averaging with the given stride
/// (border blocks are clipped). Used to derive the student pyramid.
FeatureMap block_average_downsample(const FeatureMap& src, int stride);

std::array<FeatureMap, MultiScaleFusion2D::kLevels> build_student_pyramid(const FeatureMap& full);

}  // namespace ovo
