#include "ovo/heads.hpp"

#include <cmath>
#include <stdexcept>

namespace ovo {

std::string activation_name(Activation a) {
  return a == Activation::relu ? "relu" : "identity";
}

Activation activation_from_name(const std::string& name) {
  if (name == "relu") {
    return Activation::relu;
  }
  if (name == "identity") {
    return Activation::identity;
  }
  throw std::runtime_error("unknown activation: " + name);
}

namespace {

Eigen::MatrixXd apply_activation(Eigen::MatrixXd preact, Activation act) {
  if (act == Activation::relu) {
    preact = preact.cwiseMax(0.0);
  }
  return preact;
}

// Subgradient at zero is fixed to zero.
Eigen::MatrixXd activation_grad_mask(const Eigen::MatrixXd& preact, Activation act) {
  if (act == Activation::identity) {
    return Eigen::MatrixXd::Ones(preact.rows(), preact.cols());
  }
  return (preact.array() > 0.0).cast<double>();
}

void init_layer(DenseLayer& layer, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(layer.input_dim()));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
    for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
      layer.weight(r, c) = dist(rng);
    }
  }
  for (Eigen::Index i = 0; i < layer.bias.size(); ++i) {
    layer.bias[i] = dist(rng);
  }
}

Eigen::Index layer_stack_parameter_count(const std::vector<DenseLayer>& layers) {
  Eigen::Index n = 0;
  for (const auto& l : layers) {
    n += l.weight.size() + l.bias.size();
  }
  return n;
}

Eigen::VectorXd flatten_layer_stack(const std::vector<DenseLayer>& layers) {
  Eigen::VectorXd flat(layer_stack_parameter_count(layers));
  Eigen::Index at = 0;
  for (const auto& l : layers) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) {
        flat[at++] = l.weight(r, c);
      }
    }
    flat.segment(at, l.bias.size()) = l.bias;
    at += l.bias.size();
  }
  return flat;
}

void unflatten_layer_stack(std::vector<DenseLayer>& layers,
                           const Eigen::Ref<const Eigen::VectorXd>& flat) {
  if (flat.size() != layer_stack_parameter_count(layers)) {
    throw std::invalid_argument("parameter vector size does not match layer stack");
  }
  Eigen::Index at = 0;
  for (auto& l : layers) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) {
        l.weight(r, c) = flat[at++];
      }
    }
    l.bias = flat.segment(at, l.bias.size());
    at += l.bias.size();
  }
}

}  // namespace

GradientBuffer GradientBuffer::like(const std::vector<DenseLayer>& layers) {
  GradientBuffer g;
  g.weight.reserve(layers.size());
  g.bias.reserve(layers.size());
  for (const auto& l : layers) {
    g.weight.push_back(Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()));
    g.bias.push_back(Eigen::VectorXd::Zero(l.bias.size()));
  }
  return g;
}

void GradientBuffer::set_zero() {
  for (auto& w : weight) {
    w.setZero();
  }
  for (auto& b : bias) {
    b.setZero();
  }
}

void GradientBuffer::add_scaled(const GradientBuffer& other, double scale) {
  if (other.weight.size() != weight.size()) {
    throw std::invalid_argument("gradient buffers have different layer counts");
  }
  for (std::size_t i = 0; i < weight.size(); ++i) {
    weight[i] += scale * other.weight[i];
    bias[i] += scale * other.bias[i];
  }
}

Eigen::Index GradientBuffer::parameter_count() const {
  Eigen::Index n = 0;
  for (std::size_t i = 0; i < weight.size(); ++i) {
    n += weight[i].size() + bias[i].size();
  }
  return n;
}

Eigen::VectorXd GradientBuffer::flattened() const {
  Eigen::VectorXd flat(parameter_count());
  Eigen::Index at = 0;
  for (std::size_t i = 0; i < weight.size(); ++i) {
    const auto& w = weight[i];
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) {
        flat[at++] = w(r, c);
      }
    }
    flat.segment(at, bias[i].size()) = bias[i];
    at += bias[i].size();
  }
  return flat;
}

AlignmentHead::AlignmentHead(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    if (l.weight.rows() != l.bias.size()) {
      throw std::invalid_argument("layer bias size does not match weight rows");
    }
    if (i > 0 && l.input_dim() != layers_[i - 1].output_dim()) {
      throw std::invalid_argument("consecutive layer dimensions do not chain");
    }
  }
}

AlignmentHead AlignmentHead::with_dims(int input_dim, const std::vector<int>& hidden_dims,
                                       int output_dim) {
  std::vector<DenseLayer> layers;
  int in = input_dim;
  for (int h : hidden_dims) {
    layers.push_back({Eigen::MatrixXd::Zero(h, in), Eigen::VectorXd::Zero(h), Activation::relu});
    in = h;
  }
  layers.push_back({Eigen::MatrixXd::Zero(output_dim, in), Eigen::VectorXd::Zero(output_dim),
                    Activation::identity});
  return AlignmentHead(std::move(layers));
}

AlignmentHead AlignmentHead::identity_head(int dim) {
  std::vector<DenseLayer> layers;
  layers.push_back({Eigen::MatrixXd::Identity(dim, dim), Eigen::VectorXd::Zero(dim),
                    Activation::identity});
  return AlignmentHead(std::move(layers));
}

int AlignmentHead::input_dim() const {
  return layers_.empty() ? 0 : layers_.front().input_dim();
}

int AlignmentHead::output_dim() const {
  return layers_.empty() ? 0 : layers_.back().output_dim();
}

void AlignmentHead::initialize(std::mt19937_64& rng) {
  for (auto& l : layers_) {
    init_layer(l, rng);
  }
}

Eigen::MatrixXd AlignmentHead::forward(const Eigen::Ref<const Eigen::MatrixXd>& features) const {
  if (features.cols() != input_dim()) {
    throw std::invalid_argument("head/input dimension mismatch");
  }
  Eigen::MatrixXd x = features;
  for (const auto& l : layers_) {
    x = apply_activation(((x * l.weight.transpose()).rowwise() + l.bias.transpose()).eval(),
                         l.activation);
  }
  return x;
}

Eigen::MatrixXd AlignmentHead::forward_cached(const Eigen::Ref<const Eigen::MatrixXd>& features,
                                              Cache& cache) const {
  if (features.cols() != input_dim()) {
    throw std::invalid_argument("head/input dimension mismatch");
  }
  cache.inputs.clear();
  cache.preacts.clear();
  cache.inputs.reserve(layers_.size());
  cache.preacts.reserve(layers_.size());
  Eigen::MatrixXd x = features;
  for (const auto& l : layers_) {
    cache.inputs.push_back(x);
    Eigen::MatrixXd pre = (x * l.weight.transpose()).rowwise() + l.bias.transpose();
    cache.preacts.push_back(pre);
    x = apply_activation(std::move(pre), l.activation);
  }
  return x;
}

Eigen::MatrixXd AlignmentHead::backward(const Cache& cache,
                                        const Eigen::Ref<const Eigen::MatrixXd>& upstream,
                                        GradientBuffer& grads) const {
  if (cache.inputs.size() != layers_.size()) {
    throw std::invalid_argument("head cache does not match layer count");
  }
  if (grads.weight.size() != layers_.size()) {
    throw std::invalid_argument("gradient buffer does not match layer count");
  }
  if (upstream.cols() != output_dim() || upstream.rows() != cache.inputs.front().rows()) {
    throw std::invalid_argument("upstream gradient shape mismatch");
  }
  Eigen::MatrixXd delta = upstream;
  for (int k = static_cast<int>(layers_.size()) - 1; k >= 0; --k) {
    const auto& l = layers_[static_cast<std::size_t>(k)];
    delta = delta.cwiseProduct(
        activation_grad_mask(cache.preacts[static_cast<std::size_t>(k)], l.activation));
    grads.weight[static_cast<std::size_t>(k)] +=
        delta.transpose() * cache.inputs[static_cast<std::size_t>(k)];
    grads.bias[static_cast<std::size_t>(k)] += delta.colwise().sum().transpose();
    delta = (delta * l.weight).eval();
  }
  return delta;
}

Eigen::Index AlignmentHead::parameter_count() const {
  return layer_stack_parameter_count(layers_);
}

Eigen::VectorXd AlignmentHead::parameters() const { return flatten_layer_stack(layers_); }

void AlignmentHead::set_parameters(const Eigen::Ref<const Eigen::VectorXd>& flat) {
  unflatten_layer_stack(layers_, flat);
}

namespace {

struct BilinearTap {
  int x0, x1, y0, y1;
  double fx, fy;
};

inline BilinearTap bilinear_tap(int tx, int ty, int sw, int sh, int tw, int th) {
  const double sx = tw > 1 ? static_cast<double>(tx) * (sw - 1) / (tw - 1) : 0.0;
  const double sy = th > 1 ? static_cast<double>(ty) * (sh - 1) / (th - 1) : 0.0;
  BilinearTap t;
  t.x0 = static_cast<int>(std::floor(sx));
  t.y0 = static_cast<int>(std::floor(sy));
  t.x1 = std::min(t.x0 + 1, sw - 1);
  t.y1 = std::min(t.y0 + 1, sh - 1);
  t.fx = sx - t.x0;
  t.fy = sy - t.y0;
  return t;
}

}  // namespace

FeatureMap bilinear_resize(const FeatureMap& src, int target_width, int target_height) {
  if (target_width <= 0 || target_height <= 0) {
    throw std::invalid_argument("bilinear target dimensions must be positive");
  }
  Eigen::MatrixXd out(static_cast<std::int64_t>(target_width) * target_height,
                      src.values.cols());
  for (int ty = 0; ty < target_height; ++ty) {
    for (int tx = 0; tx < target_width; ++tx) {
      const BilinearTap t = bilinear_tap(tx, ty, src.width, src.height, target_width,
                                         target_height);
      const std::int64_t r00 = src.pixel_index(t.x0, t.y0);
      const std::int64_t r01 = src.pixel_index(t.x1, t.y0);
      const std::int64_t r10 = src.pixel_index(t.x0, t.y1);
      const std::int64_t r11 = src.pixel_index(t.x1, t.y1);
      out.row(static_cast<std::int64_t>(ty) * target_width + tx) =
          (1.0 - t.fy) * ((1.0 - t.fx) * src.values.row(r00) + t.fx * src.values.row(r01)) +
          t.fy * ((1.0 - t.fx) * src.values.row(r10) + t.fx * src.values.row(r11));
    }
  }
  return {target_width, target_height, std::move(out)};
}

Eigen::MatrixXd bilinear_resize_backward(const Eigen::Ref<const Eigen::MatrixXd>& upstream,
                                         int src_width, int src_height, int target_width,
                                         int target_height) {
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(
      static_cast<std::int64_t>(src_width) * src_height, upstream.cols());
  for (int ty = 0; ty < target_height; ++ty) {
    for (int tx = 0; tx < target_width; ++tx) {
      const BilinearTap t = bilinear_tap(tx, ty, src_width, src_height, target_width,
                                         target_height);
      const auto up = upstream.row(static_cast<std::int64_t>(ty) * target_width + tx);
      grad.row(static_cast<std::int64_t>(t.y0) * src_width + t.x0) +=
          (1.0 - t.fy) * (1.0 - t.fx) * up;
      grad.row(static_cast<std::int64_t>(t.y0) * src_width + t.x1) += (1.0 - t.fy) * t.fx * up;
      grad.row(static_cast<std::int64_t>(t.y1) * src_width + t.x0) += t.fy * (1.0 - t.fx) * up;
      grad.row(static_cast<std::int64_t>(t.y1) * src_width + t.x1) += t.fy * t.fx * up;
    }
  }
  return grad;
}

void FusionGradients::set_zero() {
  projections.set_zero();
  mixer.set_zero();
}

void FusionGradients::add_scaled(const FusionGradients& other, double scale) {
  projections.add_scaled(other.projections, scale);
  mixer.add_scaled(other.mixer, scale);
}

Eigen::Index FusionGradients::parameter_count() const {
  return projections.parameter_count() + mixer.parameter_count();
}

Eigen::VectorXd FusionGradients::flattened() const {
  Eigen::VectorXd flat(parameter_count());
  flat << projections.flattened(), mixer.flattened();
  return flat;
}

MultiScaleFusion2D::MultiScaleFusion2D(std::vector<DenseLayer> scale_projections,
                                       AlignmentHead mixer)
    : projections_(std::move(scale_projections)), mixer_(std::move(mixer)) {
  if (projections_.size() != kLevels) {
    throw std::invalid_argument("fusion requires exactly 5 scale projections");
  }
  const int proj_out = projections_[0].output_dim();
  for (const auto& p : projections_) {
    if (p.output_dim() != proj_out || p.input_dim() != projections_[0].input_dim()) {
      throw std::invalid_argument("scale projections must share dimensions");
    }
  }
  if (mixer_.input_dim() != kLevels * proj_out) {
    throw std::invalid_argument("mixer input dim must equal concatenated projection channels");
  }
}

MultiScaleFusion2D MultiScaleFusion2D::with_dims(int input_channels, int projected_channels,
                                                 int mixer_hidden, int output_channels) {
  std::vector<DenseLayer> projections;
  for (int l = 0; l < kLevels; ++l) {
    projections.push_back({Eigen::MatrixXd::Zero(projected_channels, input_channels),
                           Eigen::VectorXd::Zero(projected_channels), Activation::identity});
  }
  std::vector<DenseLayer> mixer_layers;
  mixer_layers.push_back({Eigen::MatrixXd::Zero(mixer_hidden, kLevels * projected_channels),
                          Eigen::VectorXd::Zero(mixer_hidden), Activation::relu});
  mixer_layers.push_back({Eigen::MatrixXd::Zero(output_channels, mixer_hidden),
                          Eigen::VectorXd::Zero(output_channels), Activation::identity});
  return MultiScaleFusion2D(std::move(projections), AlignmentHead(std::move(mixer_layers)));
}

void MultiScaleFusion2D::initialize(std::mt19937_64& rng) {
  for (auto& p : projections_) {
    init_layer(p, rng);
  }
  mixer_.initialize(rng);
}

FeatureMap MultiScaleFusion2D::forward(const std::array<FeatureMap, kLevels>& pyramid,
                                       int target_width, int target_height) const {
  Cache cache;
  return forward_cached(pyramid, target_width, target_height, cache);
}

FeatureMap MultiScaleFusion2D::forward_cached(const std::array<FeatureMap, kLevels>& pyramid,
                                              int target_width, int target_height,
                                              Cache& cache) const {
  const int proj_out = projections_[0].output_dim();
  const std::int64_t pixels = static_cast<std::int64_t>(target_width) * target_height;
  Eigen::MatrixXd concat(pixels, kLevels * proj_out);
  cache.target_width = target_width;
  cache.target_height = target_height;
  for (int l = 0; l < kLevels; ++l) {
    const FeatureMap& level = pyramid[static_cast<std::size_t>(l)];
    if (level.channels() != projections_[l].input_dim()) {
      throw std::invalid_argument("pyramid level channel dim does not match projection");
    }
    cache.level_inputs[static_cast<std::size_t>(l)] = level.values;
    cache.level_dims[static_cast<std::size_t>(l)] = {level.width, level.height};
    const auto& p = projections_[static_cast<std::size_t>(l)];
    FeatureMap projected{level.width, level.height,
                         (level.values * p.weight.transpose()).rowwise() + p.bias.transpose()};
    FeatureMap upsampled = bilinear_resize(projected, target_width, target_height);
    concat.middleCols(static_cast<std::int64_t>(l) * proj_out, proj_out) =
        std::move(upsampled.values);
  }
  Eigen::MatrixXd fused = mixer_.forward_cached(concat, cache.mixer_cache);
  return {target_width, target_height, std::move(fused)};
}

void MultiScaleFusion2D::backward(const Cache& cache,
                                  const Eigen::Ref<const Eigen::MatrixXd>& upstream,
                                  FusionGradients& grads) const {
  const Eigen::MatrixXd concat_grad = mixer_.backward(cache.mixer_cache, upstream, grads.mixer);
  const int proj_out = projections_[0].output_dim();
  for (int l = 0; l < kLevels; ++l) {
    const auto [lw, lh] = cache.level_dims[static_cast<std::size_t>(l)];
    const Eigen::MatrixXd level_grad = bilinear_resize_backward(
        concat_grad.middleCols(static_cast<std::int64_t>(l) * proj_out, proj_out), lw, lh,
        cache.target_width, cache.target_height);
    const Eigen::MatrixXd& level_input = cache.level_inputs[static_cast<std::size_t>(l)];
    grads.projections.weight[static_cast<std::size_t>(l)] +=
        level_grad.transpose() * level_input;
    grads.projections.bias[static_cast<std::size_t>(l)] +=
        level_grad.colwise().sum().transpose();
  }
}

Eigen::Index MultiScaleFusion2D::parameter_count() const {
  return layer_stack_parameter_count(projections_) + mixer_.parameter_count();
}

Eigen::VectorXd MultiScaleFusion2D::parameters() const {
  Eigen::VectorXd flat(parameter_count());
  flat << flatten_layer_stack(projections_), mixer_.parameters();
  return flat;
}

void MultiScaleFusion2D::set_parameters(const Eigen::Ref<const Eigen::VectorXd>& flat) {
  const Eigen::Index proj_n = layer_stack_parameter_count(projections_);
  if (flat.size() != parameter_count()) {
    throw std::invalid_argument("parameter vector size does not match fusion module");
  }
  unflatten_layer_stack(projections_, flat.head(proj_n));
  mixer_.set_parameters(flat.tail(flat.size() - proj_n));
}

FeatureMap block_average_downsample(const FeatureMap& src, int stride) {
  if (stride <= 0) {
    throw std::invalid_argument("downsample stride must be positive");
  }
  if (stride == 1) {
    return src;
  }
  const int tw = (src.width + stride - 1) / stride;
  const int th = (src.height + stride - 1) / stride;
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<std::int64_t>(tw) * th,
                                              src.values.cols());
  for (int ty = 0; ty < th; ++ty) {
    for (int tx = 0; tx < tw; ++tx) {
      const int x0 = tx * stride;
      const int y0 = ty * stride;
      const int x1 = std::min(x0 + stride, src.width);
      const int y1 = std::min(y0 + stride, src.height);
      Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(src.values.cols());
      for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
          acc += src.values.row(src.pixel_index(x, y));
        }
      }
      out.row(static_cast<std::int64_t>(ty) * tw + tx) =
          acc / static_cast<double>((x1 - x0) * (y1 - y0));
    }
  }
  return {tw, th, std::move(out)};
}

std::array<FeatureMap, MultiScaleFusion2D::kLevels> build_student_pyramid(
    const FeatureMap& full) {
  std::array<FeatureMap, MultiScaleFusion2D::kLevels> pyramid;
  for (int l = 0; l < MultiScaleFusion2D::kLevels; ++l) {
    pyramid[static_cast<std::size_t>(l)] =
        block_average_downsample(full, MultiScaleFusion2D::kStrides[static_cast<std::size_t>(l)]);
  }
  return pyramid;
}

}  // namespace ovo
