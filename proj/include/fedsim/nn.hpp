#pragma once

#include <Eigen/Dense>
#include <optional>
#include <random>
#include <vector>

#include "fedsim/common.hpp"

namespace fedsim {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowMajorMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Activation { Relu, Softmax };

struct LayerSpec {
    int in = 0;
    int out = 0;
    Activation act = Activation::Relu;

    bool operator==(const LayerSpec&) const = default;
};

// Throws ConfigError unless widths chain, hidden layers are relu and the
// final layer is softmax.
void validate_specs(const std::vector<LayerSpec>& specs);

// Convenience builder: input -> hidden relu layers -> softmax output.
std::vector<LayerSpec> dense_stack(int input_width, const std::vector<int>& hidden,
                                   int num_classes);

Eigen::Index param_count(const std::vector<LayerSpec>& specs);

// Dense-network parameters. The flat vector is the canonical layout: for each
// layer in order, the weight matrix row-major, then the bias. Weight and bias
// accessors are zero-copy views into the flat storage, so the tensor view and
// the flat view can never disagree.
struct ModelParams {
    std::vector<LayerSpec> specs;
    Vector flat;

    ModelParams() = default;
    explicit ModelParams(std::vector<LayerSpec> s);

    int num_layers() const { return static_cast<int>(specs.size()); }
    int input_width() const { return specs.empty() ? 0 : specs.front().in; }
    int num_classes() const { return specs.empty() ? 0 : specs.back().out; }
    Eigen::Index param_count() const { return flat.size(); }

    Eigen::Map<RowMajorMatrix> weight(int layer);
    Eigen::Map<const RowMajorMatrix> weight(int layer) const;
    Eigen::Map<Vector> bias(int layer);
    Eigen::Map<const Vector> bias(int layer) const;

    bool same_shape(const ModelParams& other) const { return specs == other.specs; }
};

// Xavier-uniform weights (U[-sqrt(6/(fan_in+fan_out)), +sqrt(...)]), zero
// biases, filled in canonical flat order from the given seed.
ModelParams init_model(const std::vector<LayerSpec>& specs, std::uint64_t seed);

enum class OptimizerKind { Sgd, Adam };

struct OptimizerState {
    OptimizerKind kind = OptimizerKind::Adam;
    double learning_rate = 5e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    long step = 0;
    Vector m;  // first moment, sized on first Adam step
    Vector v;  // second moment

    static OptimizerState sgd(double lr);
    static OptimizerState adam(double lr);
};

// Additions to the plain cross-entropy objective. proximal_mu adds
// mu/2 * ||w - anchor||^2; scaffold_correction adds <correction, w>, i.e. the
// correction vector is added to the gradient each step. The two are mutually
// exclusive in any one experiment.
struct LossConfig {
    double proximal_mu = 0.0;
    std::optional<Vector> scaffold_correction;

    void validate() const;
};

// Batch forward pass; rows are samples. Returns row-stochastic class
// probabilities (softmax with max-subtraction).
Matrix forward(const ModelParams& model, const Matrix& features);

// Scalar objective used by train_step and gradient_check: mean cross-entropy
// plus any LossConfig extras evaluated at the model's parameters.
double total_loss(const ModelParams& model, const Matrix& features,
                  const std::vector<int>& labels, const LossConfig& loss,
                  const ModelParams& anchor);

// Flat gradient of total_loss at the model's parameters.
Vector loss_gradient(const ModelParams& model, const Matrix& features,
                     const std::vector<int>& labels, const LossConfig& loss,
                     const ModelParams& anchor);

struct TrainStepResult {
    ModelParams model;
    OptimizerState opt;
    double loss = 0.0;
};

// One optimizer step on the batch. Throws NumericalError if the loss or
// gradient is non-finite.
TrainStepResult train_step(const ModelParams& model, const Matrix& features,
                           const std::vector<int>& labels, const OptimizerState& opt,
                           const LossConfig& loss, const ModelParams& anchor);

enum class TrainPrecision { F64, F32 };

struct TrainOptions {
    int epochs = 1;
    int batch_size = 64;
    bool shuffle_each_epoch = true;
    OptimizerKind optimizer = OptimizerKind::Adam;
    double learning_rate = 5e-4;
    TrainPrecision precision = TrainPrecision::F64;
};

struct TrainRunResult {
    ModelParams model;
    long steps = 0;
    double final_loss = 0.0;
};

// Seeded mini-batch training: `epochs` passes over the data with a fresh
// optimizer. The rng drives only batch shuffling. The F32 precision option
// runs the inner loop in single precision and casts back at the boundary.
TrainRunResult train_epochs(const ModelParams& start, const Matrix& features,
                            const std::vector<int>& labels, const TrainOptions& options,
                            const LossConfig& loss, const ModelParams& anchor,
                            std::mt19937_64& rng);

// Element-wise sum of coefficient-scaled models. All models must share one
// shape; accumulation follows list order.
ModelParams linear_combination(const std::vector<ModelParams>& models,
                               const std::vector<double>& coefficients);

// Central-difference check (h = 1e-5) of the analytic gradient against the
// scalar objective. Returns the max relative error over every parameter, with
// denominators floored at 1e-12.
double gradient_check(const ModelParams& model, const Matrix& features,
                      const std::vector<int>& labels, const LossConfig& loss = {},
                      const ModelParams* anchor = nullptr);

}  // namespace fedsim
