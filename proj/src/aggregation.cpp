#include "fedsim/aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <set>

namespace fedsim {

Vector ClassProbabilityMatrix::flattened() const {
    const int n = num_classes();
    Vector out(static_cast<Eigen::Index>(n) * n);
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) {
            out[static_cast<Eigen::Index>(r) * n + c] = prob(r, c);
        }
    }
    return out;
}

ClassProbabilityMatrix compute_cpm(const ModelParams& model, const Dataset& aux) {
    const int nc = aux.num_classes();
    if (model.num_classes() != nc) {
        throw ConfigError("model emits " + std::to_string(model.num_classes()) +
                          " classes but auxiliary data has " + std::to_string(nc));
    }
    auto by_class = aux.indices_by_class();
    for (int c = 0; c < nc; ++c) {
        if (by_class[static_cast<std::size_t>(c)].empty()) {
            throw ConfigError("auxiliary data has no samples of class '" +
                              aux.class_names[static_cast<std::size_t>(c)] + "'");
        }
    }

    ClassProbabilityMatrix cpm;
    cpm.prob.resize(nc, nc);
    for (int c = 0; c < nc; ++c) {
        Dataset rows = subset(aux, by_class[static_cast<std::size_t>(c)]);
        Matrix probs = forward(model, rows.features);
        cpm.prob.row(c) = probs.colwise().mean();
    }
    return cpm;
}

ClusterAssignment cluster_cpms(const std::vector<ClassProbabilityMatrix>& cpms, double eps,
                               int min_pts) {
    if (eps <= 0.0) {
        throw ConfigError("dbscan eps must be > 0");
    }
    if (min_pts < 1) {
        throw ConfigError("dbscan min_pts must be >= 1");
    }
    const int n = static_cast<int>(cpms.size());
    ClusterAssignment out;
    out.cluster_of.assign(static_cast<std::size_t>(n), -1);
    if (n == 0) {
        return out;
    }

    std::vector<Vector> pts;
    pts.reserve(cpms.size());
    for (const auto& cpm : cpms) {
        if (cpm.num_classes() != cpms.front().num_classes()) {
            throw AggregationError("CPM dimensions differ across clients");
        }
        pts.push_back(cpm.flattened());
    }

    // Neighbourhoods include the point itself, so min_pts counts it too.
    std::vector<std::vector<int>> nbrs(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if ((pts[static_cast<std::size_t>(i)] - pts[static_cast<std::size_t>(j)]).norm() <=
                eps) {
                nbrs[static_cast<std::size_t>(i)].push_back(j);
            }
        }
    }
    auto is_core = [&](int i) {
        return static_cast<int>(nbrs[static_cast<std::size_t>(i)].size()) >= min_pts;
    };

    auto& label = out.cluster_of;
    int next = 0;
    for (int i = 0; i < n; ++i) {
        if (label[static_cast<std::size_t>(i)] != -1 || !is_core(i)) {
            continue;
        }
        int cid = next++;
        label[static_cast<std::size_t>(i)] = cid;
        std::deque<int> queue{i};
        while (!queue.empty()) {
            int j = queue.front();
            queue.pop_front();
            for (int nb : nbrs[static_cast<std::size_t>(j)]) {
                if (label[static_cast<std::size_t>(nb)] != -1) {
                    continue;
                }
                label[static_cast<std::size_t>(nb)] = cid;
                if (is_core(nb)) {
                    queue.push_back(nb);
                }
            }
        }
    }
    // Remaining points are noise: each becomes its own singleton cluster.
    for (int i = 0; i < n; ++i) {
        if (label[static_cast<std::size_t>(i)] == -1) {
            label[static_cast<std::size_t>(i)] = next++;
        }
    }
    // Relabel so ids are contiguous in order of first appearance.
    std::vector<int> remap(static_cast<std::size_t>(next), -1);
    int fresh = 0;
    for (int i = 0; i < n; ++i) {
        int& id = label[static_cast<std::size_t>(i)];
        if (remap[static_cast<std::size_t>(id)] == -1) {
            remap[static_cast<std::size_t>(id)] = fresh++;
        }
        id = remap[static_cast<std::size_t>(id)];
    }
    out.num_clusters = fresh;
    return out;
}

std::vector<Matrix> compute_ccpms(const std::vector<ClassProbabilityMatrix>& cpms,
                                  const ClusterAssignment& assignment) {
    if (assignment.cluster_of.size() != cpms.size()) {
        throw AggregationError("cluster assignment does not cover all CPMs");
    }
    std::vector<Matrix> ccpms(static_cast<std::size_t>(assignment.num_clusters));
    std::vector<int> members(static_cast<std::size_t>(assignment.num_clusters), 0);
    for (std::size_t i = 0; i < cpms.size(); ++i) {
        int k = assignment.cluster_of[i];
        if (k < 0 || k >= assignment.num_clusters) {
            throw AggregationError("cluster id out of range for client " + std::to_string(i));
        }
        if (members[static_cast<std::size_t>(k)] == 0) {
            ccpms[static_cast<std::size_t>(k)] = cpms[i].prob;
        } else {
            ccpms[static_cast<std::size_t>(k)] += cpms[i].prob;
        }
        members[static_cast<std::size_t>(k)] += 1;
    }
    for (std::size_t k = 0; k < ccpms.size(); ++k) {
        if (members[k] == 0) {
            throw AggregationError("cluster " + std::to_string(k) + " has no members");
        }
        ccpms[k] /= static_cast<double>(members[k]);
    }
    return ccpms;
}

namespace {

double residual_norm(const std::vector<Matrix>& ccpms, const std::vector<double>& alpha) {
    const Eigen::Index nc = ccpms.front().rows();
    Matrix r = Matrix::Zero(nc, nc);
    for (std::size_t k = 0; k < ccpms.size(); ++k) {
        r += alpha[k] * ccpms[k];
    }
    r -= Matrix::Identity(nc, nc);
    return r.norm();
}

}  // namespace

WeightSolution solve_weights(const std::vector<Matrix>& ccpms, int iters, double lr) {
    if (ccpms.empty()) {
        throw AggregationError("solve_weights needs at least one CCPM");
    }
    if (iters < 1 || lr <= 0.0) {
        throw ConfigError("solver needs iters >= 1 and lr > 0");
    }
    const Eigen::Index nc = ccpms.front().rows();
    for (const auto& m : ccpms) {
        if (m.rows() != nc || m.cols() != nc) {
            throw AggregationError("CCPM dimensions disagree");
        }
    }
    const std::size_t K = ccpms.size();

    std::vector<double> alpha(K, 1.0 / static_cast<double>(K));
    std::vector<double> m1(K, 0.0), m2(K, 0.0);
    const double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;

    WeightSolution best;
    best.alpha = alpha;
    best.residual = residual_norm(ccpms, alpha);

    const Matrix identity = Matrix::Identity(nc, nc);
    double last_checkpoint = best.residual;
    int window = 0;

    for (int t = 1; t <= iters; ++t) {
        Matrix r = -identity;
        for (std::size_t k = 0; k < K; ++k) {
            r += alpha[k] * ccpms[k];
        }
        // d/d alpha_k of ||R||_F^2 = 2 <CCPM_k, R>.
        for (std::size_t k = 0; k < K; ++k) {
            double g = 2.0 * (ccpms[k].array() * r.array()).sum();
            m1[k] = beta1 * m1[k] + (1.0 - beta1) * g;
            m2[k] = beta2 * m2[k] + (1.0 - beta2) * g * g;
            double mhat = m1[k] / (1.0 - std::pow(beta1, t));
            double vhat = m2[k] / (1.0 - std::pow(beta2, t));
            alpha[k] -= lr * mhat / (std::sqrt(vhat) + adam_eps);
            if (alpha[k] < 0.0) {
                alpha[k] = 0.0;
            }
        }
        double res = residual_norm(ccpms, alpha);
        if (res < best.residual) {
            best.residual = res;
            best.alpha = alpha;
        }
        if (++window >= 20) {
            if (last_checkpoint - best.residual < 1e-9) {
                break;
            }
            last_checkpoint = best.residual;
            window = 0;
        }
    }

    // Adam crawls the last ~1e-3 when the optimum pins a coordinate against
    // the non-negativity bound, so finish with exact coordinate descent: the
    // objective is quadratic per coordinate, giving a closed-form clamped
    // minimizer. A few sweeps land on the true constrained optimum.
    {
        Matrix r = -identity;
        for (std::size_t k = 0; k < K; ++k) {
            r += best.alpha[k] * ccpms[k];
        }
        std::vector<double> sq_norm(K);
        for (std::size_t k = 0; k < K; ++k) {
            sq_norm[k] = ccpms[k].squaredNorm();
        }
        for (int sweep = 0; sweep < 200; ++sweep) {
            double moved = 0.0;
            for (std::size_t k = 0; k < K; ++k) {
                if (sq_norm[k] <= 0.0) {
                    continue;
                }
                double target = best.alpha[k] - (ccpms[k].array() * r.array()).sum() / sq_norm[k];
                double next = target < 0.0 ? 0.0 : target;
                double delta = next - best.alpha[k];
                if (delta != 0.0) {
                    r += delta * ccpms[k];
                    best.alpha[k] = next;
                    moved = std::max(moved, std::abs(delta));
                }
            }
            if (moved < 1e-12) {
                break;
            }
        }
        best.residual = residual_norm(ccpms, best.alpha);
    }

    double total = std::accumulate(best.alpha.begin(), best.alpha.end(), 0.0);
    if (total <= 0.0) {
        warn("weight solver converged to all-zero alpha; falling back to uniform");
        std::fill(best.alpha.begin(), best.alpha.end(), 1.0 / static_cast<double>(K));
        best.residual = residual_norm(ccpms, best.alpha);
        best.fallback_uniform = true;
    }
    return best;
}

std::vector<double> assign_client_weights(const std::vector<double>& alpha,
                                          const ClusterAssignment& assignment) {
    if (static_cast<int>(alpha.size()) != assignment.num_clusters) {
        throw AggregationError("alpha length does not match cluster count");
    }
    std::vector<int> size_of(alpha.size(), 0);
    for (int k : assignment.cluster_of) {
        size_of[static_cast<std::size_t>(k)] += 1;
    }
    std::vector<double> beta(assignment.cluster_of.size(), 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < beta.size(); ++i) {
        int k = assignment.cluster_of[i];
        beta[i] = alpha[static_cast<std::size_t>(k)] /
                  static_cast<double>(size_of[static_cast<std::size_t>(k)]);
        total += beta[i];
    }
    if (total <= 0.0) {
        throw AggregationError("client weights sum to zero; solver fallback missing");
    }
    for (auto& b : beta) {
        b /= total;
    }
    return beta;
}

double default_dbscan_eps(int num_classes) {
    return 0.3 * std::sqrt(static_cast<double>(num_classes));
}

std::pair<ModelParams, FedMadeDiagnostics> fedmade_aggregate(
    const std::vector<ClientModel>& models, const Dataset& aux,
    const FedMadeParams& params) {
    if (models.empty()) {
        throw AggregationError("fedmade_aggregate needs at least one model");
    }

    // Consume models in client_id order so the result is independent of the
    // caller's ordering.
    std::vector<std::size_t> order(models.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return models[a].client_id < models[b].client_id;
    });
    for (std::size_t i = 1; i < order.size(); ++i) {
        if (models[order[i - 1]].client_id == models[order[i]].client_id) {
            throw AggregationError("duplicate client id " +
                                   std::to_string(models[order[i]].client_id));
        }
    }

    std::vector<ClassProbabilityMatrix> cpms;
    cpms.reserve(models.size());
    for (std::size_t pos : order) {
        cpms.push_back(compute_cpm(models[pos].params, aux));
    }

    double eps = params.eps > 0.0 ? params.eps : default_dbscan_eps(aux.num_classes());
    ClusterAssignment clusters = cluster_cpms(cpms, eps, params.min_pts);
    std::vector<Matrix> ccpms = compute_ccpms(cpms, clusters);
    WeightSolution sol = solve_weights(ccpms, params.solver_iters, params.solver_lr);
    std::vector<double> beta_sorted = assign_client_weights(sol.alpha, clusters);

    std::vector<ModelParams> sorted_models;
    sorted_models.reserve(models.size());
    for (std::size_t pos : order) {
        sorted_models.push_back(models[pos].params);
    }
    ModelParams aggregated = linear_combination(sorted_models, beta_sorted);

    FedMadeDiagnostics diag;
    diag.num_clusters = clusters.num_clusters;
    diag.alpha = sol.alpha;
    diag.residual = sol.residual;
    diag.fallback_uniform = sol.fallback_uniform;
    diag.beta.resize(models.size());
    diag.cluster_of.resize(models.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        diag.beta[order[i]] = beta_sorted[i];
        diag.cluster_of[order[i]] = clusters.cluster_of[i];
    }
    return {std::move(aggregated), std::move(diag)};
}

ModelParams fedavg_aggregate(const std::vector<ModelParams>& models,
                             const std::vector<Eigen::Index>& dataset_sizes) {
    if (models.size() != dataset_sizes.size() || models.empty()) {
        throw AggregationError("models and dataset sizes must align and be nonempty");
    }
    double total = 0.0;
    for (Eigen::Index n : dataset_sizes) {
        if (n <= 0) {
            throw AggregationError("dataset sizes must be positive");
        }
        total += static_cast<double>(n);
    }
    std::vector<double> coeff;
    coeff.reserve(dataset_sizes.size());
    for (Eigen::Index n : dataset_sizes) {
        coeff.push_back(static_cast<double>(n) / total);
    }
    return linear_combination(models, coeff);
}

ScaffoldServerResult scaffold_server_step(const std::vector<ModelParams>& models,
                                          const std::vector<Vector>& client_variate_deltas,
                                          const Vector& server_variate,
                                          int num_total_clients) {
    if (models.empty() || models.size() != client_variate_deltas.size()) {
        throw AggregationError("models and variate deltas must align and be nonempty");
    }
    if (num_total_clients < static_cast<int>(models.size())) {
        throw AggregationError("total client count below participant count");
    }
    for (const auto& d : client_variate_deltas) {
        if (d.size() != server_variate.size()) {
            throw AggregationError("variate delta length mismatch");
        }
    }

    std::vector<double> coeff(models.size(), 1.0 / static_cast<double>(models.size()));
    ScaffoldServerResult out;
    out.model = linear_combination(models, coeff);

    Vector mean_delta = Vector::Zero(server_variate.size());
    for (const auto& d : client_variate_deltas) {
        mean_delta += d;
    }
    mean_delta /= static_cast<double>(client_variate_deltas.size());
    out.server_variate =
        server_variate + (static_cast<double>(models.size()) /
                          static_cast<double>(num_total_clients)) *
                             mean_delta;
    return out;
}

}  // namespace fedsim
