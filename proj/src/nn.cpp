#include "fedsim/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace fedsim {

namespace {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using RowMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

struct LayerOffsets {
    Eigen::Index w = 0;
    Eigen::Index b = 0;
};

std::vector<LayerOffsets> layer_offsets(const std::vector<LayerSpec>& specs) {
    std::vector<LayerOffsets> off(specs.size());
    Eigen::Index pos = 0;
    for (std::size_t l = 0; l < specs.size(); ++l) {
        off[l].w = pos;
        pos += static_cast<Eigen::Index>(specs[l].in) * specs[l].out;
        off[l].b = pos;
        pos += specs[l].out;
    }
    return off;
}

template <typename S>
Eigen::Map<const RowMat<S>> weight_view(const std::vector<LayerSpec>& specs,
                                        const std::vector<LayerOffsets>& off,
                                        const Vec<S>& flat, int l) {
    return Eigen::Map<const RowMat<S>>(flat.data() + off[l].w, specs[l].out, specs[l].in);
}

template <typename S>
Eigen::Map<const Vec<S>> bias_view(const std::vector<LayerSpec>& specs,
                                   const std::vector<LayerOffsets>& off,
                                   const Vec<S>& flat, int l) {
    return Eigen::Map<const Vec<S>>(flat.data() + off[l].b, specs[l].out);
}

// Forward pass keeping pre-activations (zs) and activations (as); as[0] is
// the input, as[l+1] the output of layer l. The final activation applies a
// max-subtracted softmax to the stored logits.
template <typename S>
void forward_pass(const std::vector<LayerSpec>& specs, const std::vector<LayerOffsets>& off,
                  const Vec<S>& flat, const Mat<S>& X, std::vector<Mat<S>>& zs,
                  std::vector<Mat<S>>& as) {
    const int L = static_cast<int>(specs.size());
    zs.resize(L);
    as.resize(L + 1);
    as[0] = X;
    for (int l = 0; l < L; ++l) {
        auto W = weight_view<S>(specs, off, flat, l);
        auto b = bias_view<S>(specs, off, flat, l);
        zs[l].noalias() = as[l] * W.transpose();
        zs[l].rowwise() += b.transpose();
        if (specs[l].act == Activation::Relu) {
            as[l + 1] = zs[l].cwiseMax(S(0));
        } else {
            Mat<S> p = zs[l];
            Vec<S> rowmax = p.rowwise().maxCoeff();
            p.colwise() -= rowmax;
            p = p.array().exp();
            Vec<S> rowsum = p.rowwise().sum();
            p.array().colwise() /= rowsum.array();
            as[l + 1] = std::move(p);
        }
    }
}

// Mean cross-entropy from final-layer logits, computed via log-sum-exp so a
// confident wrong prediction yields a large finite loss instead of -inf.
template <typename S>
double ce_from_logits(const Mat<S>& logits, const std::vector<int>& labels) {
    const Eigen::Index B = logits.rows();
    double total = 0.0;
    for (Eigen::Index i = 0; i < B; ++i) {
        S zmax = logits.row(i).maxCoeff();
        S sum = (logits.row(i).array() - zmax).exp().sum();
        S logp = logits(i, labels[static_cast<std::size_t>(i)]) - zmax - std::log(sum);
        total -= static_cast<double>(logp);
    }
    return total / static_cast<double>(B);
}

struct ExtrasView {
    double proximal_mu = 0.0;
    const void* anchor = nullptr;      // Vec<S>*
    const void* correction = nullptr;  // Vec<S>*
};

// Loss and flat gradient for mean cross-entropy plus proximal / correction
// extras. Returns the total loss.
template <typename S>
double backward_pass(const std::vector<LayerSpec>& specs, const std::vector<LayerOffsets>& off,
                     const Vec<S>& flat, const Mat<S>& X, const std::vector<int>& labels,
                     double proximal_mu, const Vec<S>* anchor, const Vec<S>* correction,
                     Vec<S>& grad) {
    const int L = static_cast<int>(specs.size());
    const Eigen::Index B = X.rows();
    std::vector<Mat<S>> zs, as;
    forward_pass<S>(specs, off, flat, X, zs, as);

    double loss = ce_from_logits<S>(zs[static_cast<std::size_t>(L - 1)], labels);

    grad.setZero(flat.size());

    // Fused softmax + cross-entropy gradient: (p - onehot) / B.
    Mat<S> delta = as[static_cast<std::size_t>(L)];
    for (Eigen::Index i = 0; i < B; ++i) {
        delta(i, labels[static_cast<std::size_t>(i)]) -= S(1);
    }
    delta /= static_cast<S>(B);

    for (int l = L - 1; l >= 0; --l) {
        Eigen::Map<RowMat<S>> gW(grad.data() + off[l].w, specs[l].out, specs[l].in);
        Eigen::Map<Vec<S>> gb(grad.data() + off[l].b, specs[l].out);
        gW.noalias() = delta.transpose() * as[static_cast<std::size_t>(l)];
        gb = delta.colwise().sum();
        if (l > 0) {
            auto W = weight_view<S>(specs, off, flat, l);
            Mat<S> dA = delta * W;
            delta = dA.cwiseProduct(
                (zs[static_cast<std::size_t>(l - 1)].array() > S(0)).template cast<S>().matrix());
        }
    }

    if (proximal_mu > 0.0) {
        const Vec<S>& a = *anchor;
        loss += 0.5 * proximal_mu * static_cast<double>((flat - a).squaredNorm());
        grad += static_cast<S>(proximal_mu) * (flat - a);
    }
    if (correction != nullptr) {
        loss += static_cast<double>(correction->dot(flat));
        grad += *correction;
    }
    return loss;
}

template <typename S>
void apply_sgd(Vec<S>& flat, const Vec<S>& grad, S lr) {
    flat -= lr * grad;
}

template <typename S>
struct AdamBuffers {
    Vec<S> m, v;
    long step = 0;
};

template <typename S>
void apply_adam(Vec<S>& flat, const Vec<S>& grad, AdamBuffers<S>& buf, S lr, S beta1, S beta2,
                S eps) {
    if (buf.m.size() != flat.size()) {
        buf.m = Vec<S>::Zero(flat.size());
        buf.v = Vec<S>::Zero(flat.size());
    }
    buf.step += 1;
    buf.m = beta1 * buf.m + (S(1) - beta1) * grad;
    buf.v = beta2 * buf.v + (S(1) - beta2) * grad.cwiseProduct(grad);
    S c1 = S(1) - std::pow(beta1, static_cast<S>(buf.step));
    S c2 = S(1) - std::pow(beta2, static_cast<S>(buf.step));
    flat.array() -=
        lr * (buf.m.array() / c1) / ((buf.v.array() / c2).sqrt() + eps);
}

void check_batch(const ModelParams& model, const Matrix& features,
                 const std::vector<int>& labels) {
    if (features.rows() == 0) {
        throw ConfigError("empty batch");
    }
    if (features.cols() != model.input_width()) {
        throw ConfigError("layer 0 expects " + std::to_string(model.input_width()) +
                          " inputs, batch has " + std::to_string(features.cols()) +
                          " columns");
    }
    if (static_cast<Eigen::Index>(labels.size()) != features.rows()) {
        throw ConfigError("batch has " + std::to_string(features.rows()) +
                          " rows but " + std::to_string(labels.size()) + " labels");
    }
    const int nc = model.num_classes();
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= nc) {
            throw ConfigError("label " + std::to_string(labels[i]) + " at row " +
                              std::to_string(i) + " outside [0, " + std::to_string(nc) + ")");
        }
    }
}

void check_loss_shapes(const ModelParams& model, const LossConfig& loss,
                       const ModelParams& anchor) {
    loss.validate();
    if (loss.proximal_mu > 0.0 && !model.same_shape(anchor)) {
        throw ConfigError("proximal anchor shape differs from model shape");
    }
    if (loss.scaffold_correction &&
        loss.scaffold_correction->size() != model.param_count()) {
        throw ConfigError("scaffold correction length " +
                          std::to_string(loss.scaffold_correction->size()) +
                          " does not match parameter count " +
                          std::to_string(model.param_count()));
    }
}

}  // namespace

void validate_specs(const std::vector<LayerSpec>& specs) {
    if (specs.empty()) {
        throw ConfigError("model needs at least one layer");
    }
    for (std::size_t l = 0; l < specs.size(); ++l) {
        if (specs[l].in <= 0 || specs[l].out <= 0) {
            throw ConfigError("layer " + std::to_string(l) + " has non-positive width");
        }
        if (l > 0 && specs[l].in != specs[l - 1].out) {
            throw ConfigError("layer " + std::to_string(l) + " expects " +
                              std::to_string(specs[l].in) + " inputs but layer " +
                              std::to_string(l - 1) + " emits " +
                              std::to_string(specs[l - 1].out));
        }
        bool last = (l + 1 == specs.size());
        if (last && specs[l].act != Activation::Softmax) {
            throw ConfigError("final layer must be softmax");
        }
        if (!last && specs[l].act != Activation::Relu) {
            throw ConfigError("hidden layer " + std::to_string(l) + " must be relu");
        }
    }
}

std::vector<LayerSpec> dense_stack(int input_width, const std::vector<int>& hidden,
                                   int num_classes) {
    std::vector<LayerSpec> specs;
    int in = input_width;
    for (int h : hidden) {
        specs.push_back({in, h, Activation::Relu});
        in = h;
    }
    specs.push_back({in, num_classes, Activation::Softmax});
    validate_specs(specs);
    return specs;
}

Eigen::Index param_count(const std::vector<LayerSpec>& specs) {
    Eigen::Index n = 0;
    for (const auto& s : specs) {
        n += static_cast<Eigen::Index>(s.in) * s.out + s.out;
    }
    return n;
}

ModelParams::ModelParams(std::vector<LayerSpec> s) : specs(std::move(s)) {
    validate_specs(specs);
    flat = Vector::Zero(fedsim::param_count(specs));
}

Eigen::Map<RowMajorMatrix> ModelParams::weight(int layer) {
    auto off = layer_offsets(specs);
    return Eigen::Map<RowMajorMatrix>(flat.data() + off[layer].w, specs[layer].out,
                                      specs[layer].in);
}

Eigen::Map<const RowMajorMatrix> ModelParams::weight(int layer) const {
    auto off = layer_offsets(specs);
    return Eigen::Map<const RowMajorMatrix>(flat.data() + off[layer].w, specs[layer].out,
                                            specs[layer].in);
}

Eigen::Map<Vector> ModelParams::bias(int layer) {
    auto off = layer_offsets(specs);
    return Eigen::Map<Vector>(flat.data() + off[layer].b, specs[layer].out);
}

Eigen::Map<const Vector> ModelParams::bias(int layer) const {
    auto off = layer_offsets(specs);
    return Eigen::Map<const Vector>(flat.data() + off[layer].b, specs[layer].out);
}

ModelParams init_model(const std::vector<LayerSpec>& specs, std::uint64_t seed) {
    ModelParams model(specs);
    std::mt19937_64 rng(seed);
    auto off = layer_offsets(specs);
    for (std::size_t l = 0; l < specs.size(); ++l) {
        double limit = std::sqrt(6.0 / (specs[l].in + specs[l].out));
        std::uniform_real_distribution<double> dist(-limit, limit);
        Eigen::Index n = static_cast<Eigen::Index>(specs[l].in) * specs[l].out;
        for (Eigen::Index i = 0; i < n; ++i) {
            model.flat[off[l].w + i] = dist(rng);
        }
        // biases stay zero
    }
    return model;
}

OptimizerState OptimizerState::sgd(double lr) {
    OptimizerState s;
    s.kind = OptimizerKind::Sgd;
    s.learning_rate = lr;
    return s;
}

OptimizerState OptimizerState::adam(double lr) {
    OptimizerState s;
    s.kind = OptimizerKind::Adam;
    s.learning_rate = lr;
    return s;
}

void LossConfig::validate() const {
    if (proximal_mu < 0.0) {
        throw ConfigError("proximal_mu must be >= 0");
    }
    if (proximal_mu > 0.0 && scaffold_correction.has_value()) {
        throw ConfigError("proximal term and scaffold correction are mutually exclusive");
    }
}

Matrix forward(const ModelParams& model, const Matrix& features) {
    if (features.rows() == 0) {
        throw ConfigError("empty batch");
    }
    if (features.cols() != model.input_width()) {
        throw ConfigError("layer 0 expects " + std::to_string(model.input_width()) +
                          " inputs, batch has " + std::to_string(features.cols()) +
                          " columns");
    }
    auto off = layer_offsets(model.specs);
    std::vector<Matrix> zs, as;
    forward_pass<double>(model.specs, off, model.flat, features, zs, as);
    return as.back();
}

double total_loss(const ModelParams& model, const Matrix& features,
                  const std::vector<int>& labels, const LossConfig& loss,
                  const ModelParams& anchor) {
    check_batch(model, features, labels);
    check_loss_shapes(model, loss, anchor);
    auto off = layer_offsets(model.specs);
    std::vector<Matrix> zs, as;
    forward_pass<double>(model.specs, off, model.flat, features, zs, as);
    double value = ce_from_logits<double>(zs.back(), labels);
    if (loss.proximal_mu > 0.0) {
        value += 0.5 * loss.proximal_mu * (model.flat - anchor.flat).squaredNorm();
    }
    if (loss.scaffold_correction) {
        value += loss.scaffold_correction->dot(model.flat);
    }
    return value;
}

Vector loss_gradient(const ModelParams& model, const Matrix& features,
                     const std::vector<int>& labels, const LossConfig& loss,
                     const ModelParams& anchor) {
    check_batch(model, features, labels);
    check_loss_shapes(model, loss, anchor);
    auto off = layer_offsets(model.specs);
    Vector grad;
    const Vector* corr =
        loss.scaffold_correction ? &*loss.scaffold_correction : nullptr;
    backward_pass<double>(model.specs, off, model.flat, features, labels, loss.proximal_mu,
                          &anchor.flat, corr, grad);
    return grad;
}

TrainStepResult train_step(const ModelParams& model, const Matrix& features,
                           const std::vector<int>& labels, const OptimizerState& opt,
                           const LossConfig& loss, const ModelParams& anchor) {
    check_batch(model, features, labels);
    check_loss_shapes(model, loss, anchor);

    TrainStepResult out;
    out.model = model;
    out.opt = opt;

    auto off = layer_offsets(model.specs);
    Vector grad;
    const Vector* corr =
        loss.scaffold_correction ? &*loss.scaffold_correction : nullptr;
    out.loss = backward_pass<double>(model.specs, off, model.flat, features, labels,
                                     loss.proximal_mu, &anchor.flat, corr, grad);
    if (!std::isfinite(out.loss) || !grad.allFinite()) {
        throw NumericalError("non-finite loss or gradient in train_step");
    }

    if (opt.kind == OptimizerKind::Sgd) {
        apply_sgd<double>(out.model.flat, grad, opt.learning_rate);
        out.opt.step += 1;
    } else {
        AdamBuffers<double> buf;
        buf.m = (opt.m.size() == model.flat.size()) ? opt.m : Vector::Zero(model.flat.size());
        buf.v = (opt.v.size() == model.flat.size()) ? opt.v : Vector::Zero(model.flat.size());
        buf.step = opt.step;
        apply_adam<double>(out.model.flat, grad, buf, opt.learning_rate, opt.beta1, opt.beta2,
                           opt.epsilon);
        out.opt.m = std::move(buf.m);
        out.opt.v = std::move(buf.v);
        out.opt.step = buf.step;
    }
    if (!out.model.flat.allFinite()) {
        throw NumericalError("non-finite parameters after optimizer step");
    }
    return out;
}

namespace {

// Mini-batch loop shared by both precision paths.
template <typename S>
long run_epochs(const std::vector<LayerSpec>& specs, Vec<S>& flat, const Mat<S>& X,
                const std::vector<int>& labels, const TrainOptions& options,
                double proximal_mu, const Vec<S>* anchor, const Vec<S>* correction,
                std::mt19937_64& rng, double& last_loss) {
    auto off = layer_offsets(specs);
    const Eigen::Index n = X.rows();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index(0));

    AdamBuffers<S> adam;
    long steps = 0;
    Vec<S> grad;
    Mat<S> bx;
    std::vector<int> by;

    for (int e = 0; e < options.epochs; ++e) {
        if (options.shuffle_each_epoch) {
            std::shuffle(order.begin(), order.end(), rng);
        }
        for (Eigen::Index start = 0; start < n; start += options.batch_size) {
            Eigen::Index bsz = std::min<Eigen::Index>(options.batch_size, n - start);
            bx.resize(bsz, X.cols());
            by.resize(static_cast<std::size_t>(bsz));
            for (Eigen::Index i = 0; i < bsz; ++i) {
                bx.row(i) = X.row(order[static_cast<std::size_t>(start + i)]);
                by[static_cast<std::size_t>(i)] =
                    labels[static_cast<std::size_t>(order[static_cast<std::size_t>(start + i)])];
            }
            last_loss = backward_pass<S>(specs, off, flat, bx, by, proximal_mu, anchor,
                                         correction, grad);
            if (!std::isfinite(last_loss) || !grad.allFinite()) {
                throw NumericalError("non-finite loss or gradient during local training");
            }
            if (options.optimizer == OptimizerKind::Sgd) {
                apply_sgd<S>(flat, grad, static_cast<S>(options.learning_rate));
            } else {
                apply_adam<S>(flat, grad, adam, static_cast<S>(options.learning_rate),
                              S(0.9), S(0.999), S(1e-8));
            }
            ++steps;
        }
    }
    if (!flat.allFinite()) {
        throw NumericalError("non-finite parameters after local training");
    }
    return steps;
}

}  // namespace

TrainRunResult train_epochs(const ModelParams& start, const Matrix& features,
                            const std::vector<int>& labels, const TrainOptions& options,
                            const LossConfig& loss, const ModelParams& anchor,
                            std::mt19937_64& rng) {
    check_batch(start, features, labels);
    check_loss_shapes(start, loss, anchor);
    if (options.epochs < 1 || options.batch_size < 1) {
        throw ConfigError("epochs and batch_size must be >= 1");
    }

    TrainRunResult out;
    out.model = start;

    if (options.precision == TrainPrecision::F64) {
        const Vector* corr =
            loss.scaffold_correction ? &*loss.scaffold_correction : nullptr;
        out.steps = run_epochs<double>(start.specs, out.model.flat, features, labels, options,
                                       loss.proximal_mu, &anchor.flat, corr, rng,
                                       out.final_loss);
    } else {
        using MatF = Mat<float>;
        using VecF = Vec<float>;
        MatF xf = features.cast<float>();
        VecF flatf = start.flat.cast<float>();
        VecF anchorf;
        VecF corrf;
        const VecF* anchor_ptr = nullptr;
        const VecF* corr_ptr = nullptr;
        if (loss.proximal_mu > 0.0) {
            anchorf = anchor.flat.cast<float>();
            anchor_ptr = &anchorf;
        }
        if (loss.scaffold_correction) {
            corrf = loss.scaffold_correction->cast<float>();
            corr_ptr = &corrf;
        }
        out.steps = run_epochs<float>(start.specs, flatf, xf, labels, options,
                                      loss.proximal_mu, anchor_ptr, corr_ptr, rng,
                                      out.final_loss);
        out.model.flat = flatf.cast<double>();
    }
    return out;
}

ModelParams linear_combination(const std::vector<ModelParams>& models,
                               const std::vector<double>& coefficients) {
    if (models.empty() || models.size() != coefficients.size()) {
        throw AggregationError("linear_combination needs matching nonzero-length lists (" +
                               std::to_string(models.size()) + " models, " +
                               std::to_string(coefficients.size()) + " coefficients)");
    }
    for (std::size_t i = 1; i < models.size(); ++i) {
        if (!models[i].same_shape(models[0])) {
            throw AggregationError("model " + std::to_string(i) +
                                   " shape differs from model 0");
        }
    }
    ModelParams out(models[0].specs);
    for (std::size_t i = 0; i < models.size(); ++i) {
        out.flat += coefficients[i] * models[i].flat;
    }
    return out;
}

double gradient_check(const ModelParams& model, const Matrix& features,
                      const std::vector<int>& labels, const LossConfig& loss,
                      const ModelParams* anchor) {
    const ModelParams& a = anchor ? *anchor : model;
    Vector analytic = loss_gradient(model, features, labels, loss, a);

    const double h = 1e-5;
    ModelParams probe = model;
    double worst = 0.0;
    for (Eigen::Index i = 0; i < probe.flat.size(); ++i) {
        double saved = probe.flat[i];
        probe.flat[i] = saved + h;
        double up = total_loss(probe, features, labels, loss, a);
        probe.flat[i] = saved - h;
        double down = total_loss(probe, features, labels, loss, a);
        probe.flat[i] = saved;
        double numeric = (up - down) / (2.0 * h);
        double rel = std::abs(analytic[i] - numeric) /
                     std::max(1e-12, std::abs(numeric));
        worst = std::max(worst, rel);
    }
    return worst;
}

}  // namespace fedsim
