#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace iceritz {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

/// Squared rectified linear unit, max(0,x)^2. Continuously differentiable,
/// which keeps network outputs C^1 in their inputs.
inline double relu2(double x) { return x > 0.0 ? x * x : 0.0; }
inline double relu2_prime(double x) { return x > 0.0 ? 2.0 * x : 0.0; }

/// Variance floor in the layer-norm denominator.
inline constexpr double kLayerNormEps = 1e-5;

/// One network block. Hidden blocks apply affine -> layer norm -> relu2;
/// the output block is plain affine.
struct Layer {
  Matrix weight;  // out x in
  Vector bias;    // out
  Vector gain;    // layer-norm gain (empty when !normed)
  Vector shift;   // layer-norm shift (empty when !normed)
  bool normed = false;

  int fan_in() const { return static_cast<int>(weight.cols()); }
  int fan_out() const { return static_cast<int>(weight.rows()); }
};

struct EvalResult {
  double value = 0.0;
  Vector input_gradient;  // length = input dimension
};

/// Parameter-shaped value: one real per network parameter. Used for loss
/// gradients and for optimizer moment buffers.
struct ParamGradient {
  struct Block {
    Matrix weight;
    Vector bias, gain, shift;
  };
  std::vector<Block> blocks;

  void set_zero();
  void add_scaled(const ParamGradient& other, double factor);
  bool all_finite() const;
  double squared_norm() const;
  long parameter_count() const;
};

class BatchForward;

class Network {
 public:
  Network() = default;

  /// Assembles a network from explicit blocks; sizes must chain.
  Network(std::vector<Layer> layers, int input_dim);

  /// Reproducible initialization: Gaussian weights with variance 2/fan_in,
  /// zero biases, unit norm gain, zero norm shift. Same seed, same bits.
  static Network init(std::uint64_t seed, const std::vector<int>& layer_sizes);

  int input_dim() const { return input_dim_; }
  int output_dim() const;
  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }
  std::uint64_t seed() const { return seed_; }
  std::vector<int> layer_sizes() const;
  long parameter_count() const;
  ParamGradient zero_gradient() const;

  /// Value and exact input gradient at a single point.
  EvalResult eval(const Vector& x) const;

  /// Values only, one column of x per point. No caches, no tangents.
  RowVector evaluate(const Matrix& x) const;

  /// Values and input gradients for a batch; intermediates are discarded.
  void evaluate_with_gradient(const Matrix& x, RowVector& values,
                              Matrix& gradients) const;

  /// Forward pass retaining everything needed to backpropagate a scalar
  /// built from values and input gradients. with_input_tangents=false skips
  /// the gradient channels (cheaper; backward then accepts value seeds only).
  BatchForward forward(const Matrix& x, bool with_input_tangents = true) const;

  /// Checkpoint IO. The format is a small versioned binary dump of layer
  /// sizes, seed and raw parameters; round trips are bit-exact.
  void save(std::ostream& out) const;
  void save_file(const std::string& path) const;  // write-temp-then-rename
  static Network load(std::istream& in);
  static Network load_file(const std::string& path);

 private:
  // Forward kernel over channel-stacked matrices; fills caches when fwd given.
  Matrix run_stacked(const Matrix& x, int batch_n, int tangents, BatchForward* fwd) const;

  std::vector<Layer> layers_;
  int input_dim_ = 0;
  std::uint64_t seed_ = 0;
};

/// Result of Network::forward. Values and input gradients per batch column,
/// plus the reverse pass over the combined (value, input-tangent) forward
/// computation, which yields exact parameter gradients of losses that touch
/// grad_x u (the mixed d^2u / dtheta dx paths).
class BatchForward {
 public:
  const RowVector& values() const { return values_; }
  const Matrix& input_gradients() const { return input_grads_; }
  int batch_size() const { return static_cast<int>(values_.size()); }

  /// Accumulates into grad the parameter gradient of
  ///   sum_i [ value_seed(i) * u(x_i) + grad_seed(:,i) . grad_x u(x_i) ].
  /// grad_seed may be empty when the forward ran without input tangents.
  void backward(const RowVector& value_seed, const Matrix& grad_seed,
                ParamGradient& grad) const;

  /// Smallest |pre-activation| over all normed layers. Finite-difference
  /// probes are only trustworthy away from the relu2 kink.
  double min_abs_preactivation() const;

 private:
  friend class Network;

  // Channel-stacked layout: S = [value | tangent_1 | ... | tangent_d],
  // each block batch_n columns wide, so affine maps run as single GEMMs.
  struct LayerCache {
    Matrix input;       // in x (1+d)*N
    Matrix centered;    // out x (1+d)*N   (normed layers)
    Matrix preact;      // out x (1+d)*N   (post norm, pre relu2)
    RowVector inv_std;  // 1 x N
    std::vector<RowVector> var_tangent;      // d rows of 1 x N
    std::vector<RowVector> inv_std_tangent;  // d rows of 1 x N
  };

  const Network* net_ = nullptr;
  int batch_n_ = 0;
  int tangents_ = 0;  // number of tangent channels (input_dim or 0)
  std::vector<LayerCache> caches_;
  RowVector values_;
  Matrix input_grads_;
};

}  // namespace iceritz
