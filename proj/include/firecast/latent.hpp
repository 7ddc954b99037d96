#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "firecast/distributions.hpp"

namespace firecast::latent {

using SpMat = Eigen::SparseMatrix<double>;

// ---------------------------------------------------------------- graphs ---

/// Undirected graph on nodes 0..n-1 without self loops or duplicate edges.
struct Graph {
  std::size_t n = 0;
  std::vector<std::pair<int, int>> edges;  // stored with first < second, sorted

  static Graph from_edges(std::size_t n, std::vector<std::pair<int, int>> edges);
  /// Rook adjacency on a rows x cols lattice, node = r * cols + c.
  static Graph lattice(int rows, int cols);

  std::vector<int> degree() const;
  std::vector<int> components() const;  // component label of each node, labels 0..k-1
  int n_components() const;
  /// Diag(degree) - adjacency.
  SpMat icar_structure() const;
};

/// First-order random-walk structure matrix on n bins.
SpMat rw1_structure(int n);

/// Intrinsic CAR structure scaled per connected component so that the geometric
/// mean of the constrained marginal variances is one. Singleton components are
/// given unit precision and no constraint.
struct ScaledIcar {
  Graph graph;
  SpMat R;
  std::vector<int> component;
  std::vector<double> scale;         // per component
  std::vector<bool> singleton;       // per component
  Eigen::MatrixXd constraints;       // one indicator row per non-singleton component
  std::vector<double> cov_eigen;     // eigenvalues of the constrained covariance (non-null modes)
  std::size_t n() const { return component.size(); }
};

ScaledIcar build_icar_scaled(const Graph& g);

/// Dense constrained covariance (generalised inverse on the constraint subspace).
Eigen::MatrixXd constrained_covariance(const Eigen::MatrixXd& Q, const Eigen::MatrixXd& C);

// ------------------------------------------------------------ hyperparameters

enum class TransformKind { Log, Logit, Identity };

/// Maps an unconstrained internal value to the natural scale.
struct Transform {
  TransformKind kind = TransformKind::Log;
  double lo = 0.0, hi = 1.0;  // bounds for Logit

  double to_natural(double x) const;
  double to_internal(double v) const;
  double log_jacobian(double x) const;  // log |d natural / d internal|
};

enum class PriorKind { PcXi, PcKappa, Gamma, PcPrec, PcBym2Phi, Normal, Flat };

struct Prior {
  PriorKind kind = PriorKind::Flat;
  double a = 0.0, b = 0.0;          // Gamma(shape a, rate b), Normal(mean a, variance b), PcPrec(U a, alpha b)
  dist::PcPriorConfig pc{};          // PcXi / PcKappa
  std::vector<double> eigen;         // PcBym2Phi: constrained ICAR covariance eigenvalues
  double phi_rate = 0.0;             // PcBym2Phi: calibrated rate

  double log_density(double v) const;  // natural scale
  static Prior gamma(double shape, double rate);
  static Prior normal(double mean, double variance);
  static Prior pc_prec(double u, double alpha);
  /// PC prior on the BYM2 mixing weight with P(phi < u) = alpha.
  static Prior pc_bym2_phi(std::vector<double> eigen, double u = 0.5, double alpha = 0.5);
  static Prior pc_xi(const dist::PcPriorConfig& cfg);
  static Prior pc_kappa(const dist::PcPriorConfig& cfg);
};

/// KLD distance sqrt(2 KLD) of the BYM2 mixture from phi = 0, from constrained ICAR eigenvalues.
double bym2_phi_distance(double phi, const std::vector<double>& eigen);

struct HyperParam {
  std::string name;
  Transform transform;
  Prior prior;
  double initial = 1.0;  // natural scale
  bool fixed = false;
};

// ------------------------------------------------------------------ model ---

enum class BlockKind { Intercept, IID, RW1, BYM2 };

struct Block {
  std::string name;
  BlockKind kind = BlockKind::IID;
  int base_dim = 1;       // nodes, bins, levels
  int n_groups = 1;       // independent replicates (grouped effects)
  int offset = 0;         // first latent index
  int tau_slot = -1;      // hyperparameter index of the precision
  int phi_slot = -1;      // BYM2 mixing weight
  double fixed_precision = 1e-3;  // Intercept prior precision
  std::shared_ptr<const ScaledIcar> icar;

  int per_group() const { return kind == BlockKind::BYM2 ? 2 * base_dim : base_dim; }
  int dim() const { return per_group() * n_groups; }
  /// Latent index of the effect entering the predictor (b for BYM2).
  int index(int node, int group = 0) const { return offset + group * per_group() + node; }
};

enum class LikKind { Bernoulli, TruncPoisson, EGP, Gamma, Weibull, Gaussian };

struct DesignEntry {
  int col = 0;
  int scale_slot = -1;  // hyperparameter multiplying this entry, -1 for none
  double coef = 1.0;
};

struct Observation {
  LikKind lik = LikKind::Gaussian;
  double y = 0.0;
  double gauss_precision = 1.0;
  int predictor = 0;
  std::vector<DesignEntry> entries;
};

struct LinearPredictor {
  std::vector<DesignEntry> entries;
};

class LatentModel {
 public:
  int add_hyper(HyperParam h);
  int add_block(Block b);  // sets offset; returns block index
  void add_observation(Observation o);

  const std::vector<Block>& blocks() const { return blocks_; }
  const std::vector<HyperParam>& hypers() const { return hypers_; }
  std::vector<HyperParam>& hypers() { return hypers_; }
  const std::vector<Observation>& observations() const { return obs_; }
  int dim() const { return dim_; }
  int block_index(const std::string& name) const;  // -1 if absent
  int hyper_index(const std::string& name) const;  // -1 if absent

  double alpha = 0.5;       // eGP median link level
  int xi_slot = -1;
  int kappa_slot = -1;
  int shape_slot = -1;
  LikKind area_lik = LikKind::EGP;  // family used for area draws in the predictive

  /// Sparse constraint matrix (k x dim).
  const SpMat& constraints() const;
  int n_constraints() const { return static_cast<int>(constraints().rows()); }

  /// Prior precision at natural hyperparameters, with a fixed sparsity pattern.
  SpMat precision(const Eigen::VectorXd& theta) const;
  /// Triplets of precision(theta), always in the same order and positions.
  void precision_triplets(const Eigen::VectorXd& theta, std::vector<Eigen::Triplet<double>>& out) const;
  double entry_value(const DesignEntry& e, const Eigen::VectorXd& theta) const {
    return e.scale_slot < 0 ? e.coef : e.coef * theta[e.scale_slot];
  }
  /// Design matrix of the given rows at natural hyperparameters.
  SpMat design(const std::vector<Observation>& rows, const Eigen::VectorXd& theta) const;
  SpMat design(const std::vector<LinearPredictor>& rows, const Eigen::VectorXd& theta) const;

  /// Log-likelihood and derivatives of observation i at linear predictor eta.
  dist::LogLikEta loglik(const Observation& o, double eta, const Eigen::VectorXd& theta) const;

  Eigen::VectorXd initial_theta() const;
  std::vector<int> free_hypers() const;
  Eigen::VectorXd to_internal(const Eigen::VectorXd& theta) const;    // free hypers only
  Eigen::VectorXd from_internal(const Eigen::VectorXd& x, const Eigen::VectorXd& base) const;
  double log_prior_internal(const Eigen::VectorXd& theta) const;      // free hypers, with Jacobian

  void validate() const;

 private:
  std::vector<Block> blocks_;
  std::vector<HyperParam> hypers_;
  std::vector<Observation> obs_;
  int dim_ = 0;
  mutable SpMat constraints_;
  mutable bool constraints_ready_ = false;
};

// ---------------------------------------------------------------- Laplace ---

struct LaplaceOptions {
  double grad_tol = 1e-8;
  int max_iter = 100;
  double step_tol = 1e-12;
};

using SparseLLT = Eigen::SimplicialLLT<SpMat, Eigen::Lower, Eigen::AMDOrdering<int>>;

/// Factorised Gaussian approximation on the constraint subspace {u : C u = 0}.
class GaussianApprox {
 public:
  GaussianApprox() = default;
  /// Factorises P + C'C (P symmetric, full storage); throws ConvergenceError when not positive definite.
  void factorize(const SpMat& P, const SpMat& C);
  /// Takes ownership of an existing factorisation of P + C'C.
  void adopt(std::shared_ptr<SparseLLT> llt, const SpMat& C);

  bool ready() const { return static_cast<bool>(llt_); }
  /// Maximiser of b'x - x'Px/2 subject to C x = 0.
  Eigen::VectorXd constrained_solve(const Eigen::VectorXd& b) const;
  /// Draw from N(0, P^-1) restricted to the constraint subspace.
  Eigen::VectorXd sample(std::mt19937_64& rng) const;
  /// log det of P restricted to the constraint subspace.
  double log_det() const { return log_det_; }
  double variance(int i) const;
  /// Variances of the rows of A applied to u.
  Eigen::VectorXd variances(const SpMat& A) const;
  int dim() const { return dim_; }

 private:
  std::shared_ptr<SparseLLT> llt_;
  SpMat c_;
  Eigen::MatrixXd pinv_ct_;              // (P + C'C)^-1 C'
  Eigen::LDLT<Eigen::MatrixXd> schur_;   // C (P + C'C)^-1 C'
  double log_det_ = 0.0;
  int dim_ = 0;
};

/// Standard normal from two open uniforms (Box-Muller); portable across standard libraries.
double standard_normal(std::mt19937_64& rng);

struct LaplaceResult {
  Eigen::VectorXd mode;
  double log_marginal = 0.0;
  double log_lik = 0.0;
  double log_det_prior = 0.0;
  double log_det_post = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> trace;  // objective after each iteration
  GaussianApprox approx;      // filled when requested
};

/// Newton-Laplace solver for one model. Sparsity patterns and orderings are
/// computed once and reused across hyperparameter values.
class LaplaceEngine {
 public:
  explicit LaplaceEngine(const LatentModel& model);
  ~LaplaceEngine();
  LaplaceEngine(const LaplaceEngine&) = delete;
  LaplaceEngine& operator=(const LaplaceEngine&) = delete;

  LaplaceResult fit(const Eigen::VectorXd& theta, const Eigen::VectorXd* start = nullptr,
                    const LaplaceOptions& opt = {}, bool keep_approx = false);
  /// Gaussian approximation at a given latent point without Newton steps.
  GaussianApprox approx_at(const Eigen::VectorXd& theta, const Eigen::VectorXd& u);
  /// log pi(y | u, theta) - u'Q u / 2 (-inf outside the likelihood support).
  double objective(const Eigen::VectorXd& theta, const Eigen::VectorXd& u);
  const LatentModel& model() const { return model_; }

 private:
  struct Impl;
  const LatentModel& model_;
  std::unique_ptr<Impl> impl_;
};

/// Projection onto {u : C u = 0}.
Eigen::VectorXd project_constraints(const SpMat& C, const Eigen::VectorXd& u);

/// Laplace approximation at natural hyperparameters theta, optionally warm started.
LaplaceResult laplace_fit(const LatentModel& model, const Eigen::VectorXd& theta,
                          const Eigen::VectorXd* start = nullptr, const LaplaceOptions& opt = {},
                          bool keep_approx = true);

/// Constrained log-determinant of a prior precision.
double constrained_log_det(const SpMat& Q, const SpMat& C);

// ------------------------------------------------------------ grid/posterior

enum class GridStrategy { ModeOnly, Axial, CCD };

struct GridConfig {
  GridStrategy strategy = GridStrategy::Axial;
  std::vector<double> axial_levels{-1.5, 1.5};  // in units of the curvature standard deviation
  double step_sigma = 1.0;
  double prune = 6.0;        // drop points with log posterior more than this below the best
  double fd_step = 1e-3;     // finite-difference step on the internal scale
  int max_bfgs_iter = 100;
  double bfgs_grad_tol = 1e-3;
  double bfgs_f_tol = 5e-3;    // stop after two steps each gaining less than this
  LaplaceOptions laplace{};
};

struct HyperPoint {
  Eigen::VectorXd theta;     // natural scale, all hypers
  Eigen::VectorXd internal;  // free hypers
  double log_marginal = 0.0;
  double log_prior = 0.0;
  double log_post = 0.0;
  double weight = 0.0;
  Eigen::VectorXd mode;
  GaussianApprox approx;
};

struct ModeSearch {
  Eigen::VectorXd internal;
  Eigen::VectorXd latent;  // Laplace mode at the hyperparameter mode
  double log_post = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
};

/// log marginal likelihood + log prior on the internal scale.
class PosteriorObjective {
 public:
  PosteriorObjective(const LatentModel& model, LaplaceOptions opt);
  double operator()(const Eigen::VectorXd& internal);
  const LaplaceResult& last() const { return last_; }
  int evaluations() const { return n_eval_; }
  Eigen::VectorXd theta(const Eigen::VectorXd& internal) const;
  LaplaceEngine& engine() { return *engine_; }
  /// Warm start used by the next evaluation.
  void set_warm(const Eigen::VectorXd& u) { warm_ = u; }

 private:
  const LatentModel& model_;
  std::unique_ptr<LaplaceEngine> engine_;
  LaplaceOptions opt_;
  Eigen::VectorXd base_;
  Eigen::VectorXd warm_;
  LaplaceResult last_;
  int n_eval_ = 0;
};

ModeSearch find_mode(const LatentModel& model, const GridConfig& cfg, PosteriorObjective& obj);

struct Fit {
  std::vector<HyperPoint> points;  // weights sum to one
  ModeSearch mode;
  Eigen::VectorXd sigma;           // curvature step sizes at the mode, internal scale
};

Fit hyper_grid(const LatentModel& model, const GridConfig& cfg);

/// Rebuilds the Gaussian approximation of a stored grid point (theta and mode) without Newton steps.
GaussianApprox rebuild_approx(const LatentModel& model, const Eigen::VectorXd& theta,
                              const Eigen::VectorXd& mode);

/// Mixture of Gaussians marginal for one latent coordinate.
struct MixtureMarginal {
  std::vector<double> weight, mean, sd;
  double mean_value() const;
  double cdf(double x) const;
  double quantile(double p) const;
};

MixtureMarginal latent_marginal(const Fit& fit, int index);
/// Posterior mean of each natural hyperparameter under the grid weights.
Eigen::VectorXd hyper_posterior_mean(const Fit& fit);

// -------------------------------------------------------------- predictive

struct PredictiveCell {
  LinearPredictor z, c, b;
};

/// Per cell and draw: presence and the conditional count / area (hectares) drawn
/// alongside it. The hurdle response is z * count and z * area.
struct PredictiveDraws {
  std::vector<std::vector<std::uint8_t>> z;  // [cell][draw]
  std::vector<std::vector<double>> count;
  std::vector<std::vector<double>> area;
  std::vector<int> failures;  // per cell: draws whose parameters had to be clamped
};

/// Hurdle posterior predictive for the given cells. Area draws are squared
/// draws of the modelled square-root response.
PredictiveDraws posterior_predictive(const LatentModel& model, const Fit& fit,
                                     const std::vector<PredictiveCell>& cells, int n_samples,
                                     std::uint64_t seed);

/// Draws of generic linear predictors (rows x samples).
Eigen::MatrixXd sample_linear_predictors(const LatentModel& model, const Fit& fit,
                                         const std::vector<LinearPredictor>& rows, int n_samples,
                                         std::uint64_t seed);

/// Draw a latent vector from the prior at natural hyperparameters (constraints enforced).
Eigen::VectorXd sample_prior(const LatentModel& model, const Eigen::VectorXd& theta,
                             std::mt19937_64& rng);

// -------------------------------------------------------------- binning ---

/// Quantile bin edges (n_bins - 1 interior cut points) of the masked values.
struct Binning {
  std::vector<double> cuts;  // strictly increasing after duplicate collapse
  int n_bins() const { return static_cast<int>(cuts.size()) + 1; }
  int bin(double v) const;   // 0-based, clamped to the edge bins
  bool collapsed = false;    // duplicates merged
};

Binning bin_covariate(const std::vector<double>& values, int n_bins,
                      const std::vector<bool>* mask = nullptr);

// ------------------------------------------------------------- assembly ---

/// One (unit, month) cell of the hurdle model with its first-stage forecasts.
struct HurdleCell {
  int unit = 0;
  int time = 0;     // absolute month index
  int month = 1;    // calendar month 1..12
  int year = 0;
  double count = 0.0;
  double area = 0.0;      // hectares
  double fc_count = 0.0;  // first-stage count forecast
  double fc_area = 0.0;   // first-stage square-root area forecast
};

struct HurdleInputs {
  Graph council_graph;
  Graph district_graph;
  std::vector<int> unit_district;  // district of each council
  std::vector<HurdleCell> train, test;
};

enum class ModelVariant { M1, M2, M3, M4 };

ModelVariant variant_from_name(const std::string& name);
std::string variant_name(ModelVariant v);

struct HurdleConfig {
  ModelVariant variant = ModelVariant::M1;
  int n_bins = 20;
  double alpha = 0.5;
  dist::PcPriorConfig pc{};
  double intercept_variance = 1000.0;
  double beta_variance = 0.1;
  double tau_gamma_shape = 0.1, tau_gamma_rate = 0.1;
  double bym2_u = 1.0, bym2_alpha = 0.01;
  double phi_u = 0.5, phi_alpha = 0.5;

  bool r_effects() const { return variant != ModelVariant::M4; }
  LikKind area_lik() const;
  void validate() const;
};

struct HurdleModel {
  LatentModel model;
  std::vector<PredictiveCell> test;
  Binning bin_zc, bin_zb, bin_c, bin_b;
  int n_z_rows = 0, n_c_rows = 0;
};

/// Builds the three linear predictors of the hurdle model: presence over all
/// training cells, count and square-root area over training cells with fire.
HurdleModel assemble(const HurdleInputs& in, const HurdleConfig& cfg);

// ------------------------------------------------------------ serialisation

std::string model_to_json(const LatentModel& model);
LatentModel model_from_json(const std::string& text);
std::string fit_to_json(const Fit& fit);
/// Restores grid points and rebuilds their Gaussian approximations from the model.
Fit fit_from_json(const std::string& text, const LatentModel& model);

}  // namespace firecast::latent
