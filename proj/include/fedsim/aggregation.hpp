#pragma once

#include <utility>
#include <vector>

#include "fedsim/common.hpp"
#include "fedsim/data.hpp"
#include "fedsim/nn.hpp"

namespace fedsim {

// Row c is the mean predicted-probability vector over auxiliary samples of
// true class c; rows are stochastic.
struct ClassProbabilityMatrix {
    Matrix prob;

    int num_classes() const { return static_cast<int>(prob.rows()); }
    Vector flattened() const;  // row-major
};

ClassProbabilityMatrix compute_cpm(const ModelParams& model, const Dataset& aux);

struct ClusterAssignment {
    std::vector<int> cluster_of;  // client index -> cluster id in [0, K)
    int num_clusters = 0;
};

// DBSCAN over flattened CPMs with Euclidean distance. Neighbourhood counts
// include the point itself. Border points join the first discovering core
// point's cluster (scan order = list order); noise points are promoted to
// singleton clusters; ids are contiguous from 0 in order of first appearance.
ClusterAssignment cluster_cpms(const std::vector<ClassProbabilityMatrix>& cpms, double eps,
                               int min_pts);

// Arithmetic mean of member CPMs, one matrix per cluster.
std::vector<Matrix> compute_ccpms(const std::vector<ClassProbabilityMatrix>& cpms,
                                  const ClusterAssignment& assignment);

struct WeightSolution {
    std::vector<double> alpha;
    double residual = 0.0;  // Frobenius norm of (sum_k alpha_k CCPM_k - I)
    bool fallback_uniform = false;
};

// Projected-gradient Adam on || sum_k alpha_k CCPM_k - I ||_F with alpha >= 0
// (negatives clamped after each step), initialized at 1/K. Early-exits when
// the best residual improves by < 1e-9 over 20 iterations. An all-zero
// solution falls back to uniform alpha with a logged warning.
WeightSolution solve_weights(const std::vector<Matrix>& ccpms, int iters = 500,
                             double lr = 0.01);

// beta_i = alpha_{cluster(i)} / |cluster(i)|, normalized to sum 1.
std::vector<double> assign_client_weights(const std::vector<double>& alpha,
                                          const ClusterAssignment& assignment);

struct FedMadeParams {
    double eps = 0.0;  // <= 0 selects the default 0.3 * sqrt(N_C)
    int min_pts = 2;
    int solver_iters = 500;
    double solver_lr = 0.01;
};

double default_dbscan_eps(int num_classes);

struct FedMadeDiagnostics {
    int num_clusters = 0;
    std::vector<double> alpha;
    std::vector<double> beta;      // aligned with the input model order
    std::vector<int> cluster_of;   // aligned with the input model order
    double residual = 0.0;
    bool fallback_uniform = false;
};

struct ClientModel {
    int client_id = 0;
    ModelParams params;
};

// Full pipeline: CPMs -> clustering -> CCPMs -> weight solve -> per-client
// weights -> weighted combination. Models are consumed in client_id order
// internally, so the result is invariant to input permutation.
std::pair<ModelParams, FedMadeDiagnostics> fedmade_aggregate(
    const std::vector<ClientModel>& models, const Dataset& aux, const FedMadeParams& params);

// Weights proportional to dataset sizes.
ModelParams fedavg_aggregate(const std::vector<ModelParams>& models,
                             const std::vector<Eigen::Index>& dataset_sizes);

struct ScaffoldServerResult {
    ModelParams model;
    Vector server_variate;
};

// Global model = mean of client models; server variate += (|U|/N_total) *
// mean(client variate deltas).
ScaffoldServerResult scaffold_server_step(const std::vector<ModelParams>& models,
                                          const std::vector<Vector>& client_variate_deltas,
                                          const Vector& server_variate,
                                          int num_total_clients);

}  // namespace fedsim
