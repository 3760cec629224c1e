#pragma once

#include "dcpl/data.hpp"

#include <vector>

namespace dcpl {

// Per-column z-scoring; constant columns map to zero.
struct Standardization {
    Eigen::RowVectorXd mean;
    Eigen::RowVectorXd sigma;

    Mat apply(const Mat& x) const;
};

Standardization fit_standardization(const Mat& x);
Mat standardize(const Mat& x);

// Hard partition of the users plus the centroids it was built around.
struct ClusterModel {
    int n_clusters = 0;
    VecI assignment;   // user -> cluster
    Mat centroids;     // C×D
    double eps_current = 0.5;   // ε₁, weight of the freshly computed centroid
    double eps_previous = 0.5;  // ε₂, weight of the previous stage's centroid

    Mat membership_matrix() const;  // N×C one-hot
};

// Row means per cluster; empty clusters yield zero rows.
Mat group_means(const VecI& assignment, int n_clusters, const Mat& rows);

ClusterModel kmeans_pp(const Mat& x, int n_clusters, Rng& rng, int max_iter = 300,
                       double tol = 1e-8);

// One dynamic membership update: mix fresh centroids with the previous stage's
// (ε₁·new + ε₂·old), reassign to the nearest mixed centroid, iterate until the
// centroids stop moving. Empty clusters keep their previous mixed centroid.
ClusterModel update_clusters(const Mat& prev_centroids, const VecI& prev_assignment,
                             const Mat& x_next, double delta, double eps1, double eps2,
                             int max_iter = 300);

// Per-user empirical reward shares from a training window, duplicated into the
// (payoff, contribution) column pairs so the feature shape matches later stages.
Mat initial_reward_features(const EventLog& log, const Network& net, const StagePartition& part);

struct InitialClusters {
    ClusterModel model;
    Mat features_raw;       // N×4
    Mat features;           // standardized
    Standardization scaler;
};

InitialClusters initial_clusters(const EventLog& log, const Network& net,
                                 const StagePartition& part, int n_clusters, Rng& rng);

struct ClusterSelection {
    std::vector<int> candidates;
    std::vector<double> wcssd;
    std::vector<double> bic;
    int chosen = 0;  // 0 when no elbow is defined
};

// WC-SSD and spherical-Gaussian BIC per candidate; the elbow (largest positive
// second difference of WC-SSD) picks C, ties resolved toward smaller C.
ClusterSelection select_num_clusters(const Mat& x, const std::vector<int>& candidates, Rng& rng);

double adjusted_rand_index(const VecI& a, const VecI& b);
double normalized_mutual_information(const VecI& a, const VecI& b);

// degree, harmonic closeness, local clustering coefficient — all on the
// undirected projection of the follower graph.
Mat network_features(const Network& net);

}  // namespace dcpl
