#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "plume/common.hpp"
#include "plume/random.hpp"

namespace plume {

// ---- network structure ----

struct NetworkShape {
  int d1 = 0;  // input width
  int d2 = 0;  // hidden neurons
  int d3 = 0;  // output width

  int n_params() const { return d1 * d2 + d2 * d3 + d2 + d3; }

  void validate() const {
    require(d1 >= 1 && d2 >= 1 && d3 >= 1,
            "network dimensions must all be at least 1");
  }
};

/// Weights and biases of a single-hidden-layer network. The flat parameter
/// vector orders them as W1 row-major, b1, W2 row-major, b2.
struct NetworkParams {
  Eigen::MatrixXd w1;  // d2 x d1
  Eigen::VectorXd b1;  // d2
  Eigen::MatrixXd w2;  // d3 x d2
  Eigen::VectorXd b2;  // d3

  NetworkShape shape() const {
    return {static_cast<int>(w1.cols()), static_cast<int>(w1.rows()),
            static_cast<int>(w2.rows())};
  }

  static NetworkParams zeros(const NetworkShape& s) {
    s.validate();
    NetworkParams p;
    p.w1 = Eigen::MatrixXd::Zero(s.d2, s.d1);
    p.b1 = Eigen::VectorXd::Zero(s.d2);
    p.w2 = Eigen::MatrixXd::Zero(s.d3, s.d2);
    p.b2 = Eigen::VectorXd::Zero(s.d3);
    return p;
  }

  Eigen::VectorXd flatten() const {
    const NetworkShape s = shape();
    Eigen::VectorXd v(s.n_params());
    int k = 0;
    for (int r = 0; r < s.d2; ++r)
      for (int c = 0; c < s.d1; ++c) v[k++] = w1(r, c);
    for (int r = 0; r < s.d2; ++r) v[k++] = b1[r];
    for (int r = 0; r < s.d3; ++r)
      for (int c = 0; c < s.d2; ++c) v[k++] = w2(r, c);
    for (int r = 0; r < s.d3; ++r) v[k++] = b2[r];
    return v;
  }

  static NetworkParams unflatten(const NetworkShape& s,
                                 const Eigen::VectorXd& v) {
    s.validate();
    require(v.size() == s.n_params(), "flat parameter vector size mismatch");
    NetworkParams p = zeros(s);
    int k = 0;
    for (int r = 0; r < s.d2; ++r)
      for (int c = 0; c < s.d1; ++c) p.w1(r, c) = v[k++];
    for (int r = 0; r < s.d2; ++r) p.b1[r] = v[k++];
    for (int r = 0; r < s.d3; ++r)
      for (int c = 0; c < s.d2; ++c) p.w2(r, c) = v[k++];
    for (int r = 0; r < s.d3; ++r) p.b2[r] = v[k++];
    return p;
  }
};

/// Hidden activation: 2/(1+exp(-2z)) - 1, algebraically tanh(z) but pinned
/// to this exact evaluation so results are reproducible to the bit.
inline double hidden_activation(double z) {
  return 2.0 / (1.0 + std::exp(-2.0 * z)) - 1.0;
}

inline Eigen::VectorXd hidden_layer(const NetworkParams& p,
                                    const Eigen::VectorXd& x) {
  Eigen::VectorXd a = p.w1 * x + p.b1;
  for (int i = 0; i < a.size(); ++i) a[i] = hidden_activation(a[i]);
  return a;
}

/// y = W2 * act(W1 x + b1) + b2 with identity output activation.
inline Eigen::VectorXd forward(const NetworkParams& p,
                               const Eigen::VectorXd& x) {
  require(x.size() == p.w1.cols(), "input width mismatch");
  return p.w2 * hidden_layer(p, x) + p.b2;
}

// ---- loss, residuals, jacobian ----
// Sample matrices hold one sample per row: inputs N x d1, targets N x d3.

namespace detail {

inline void check_sample_dims(const NetworkParams& p,
                              const Eigen::MatrixXd& inputs,
                              const Eigen::MatrixXd& targets) {
  require(inputs.rows() == targets.rows(),
          "inputs and targets must pair up");
  require(inputs.rows() >= 1, "at least one sample required");
  require(inputs.cols() == p.w1.cols(), "input width mismatch");
  require(targets.cols() == p.w2.rows(), "target width mismatch");
}

/// All hidden activations at once: N x d2.
inline Eigen::MatrixXd hidden_matrix(const NetworkParams& p,
                                     const Eigen::MatrixXd& inputs) {
  Eigen::MatrixXd a = inputs * p.w1.transpose();
  a.rowwise() += p.b1.transpose();
  for (int r = 0; r < a.rows(); ++r)
    for (int c = 0; c < a.cols(); ++c) a(r, c) = hidden_activation(a(r, c));
  return a;
}

/// Residual matrix h(x) - y: N x d3.
inline Eigen::MatrixXd residual_matrix(const NetworkParams& p,
                                       const Eigen::MatrixXd& inputs,
                                       const Eigen::MatrixXd& targets) {
  Eigen::MatrixXd h = hidden_matrix(p, inputs) * p.w2.transpose();
  h.rowwise() += p.b2.transpose();
  return h - targets;
}

}  // namespace detail

/// Mean squared error normalized by N * d3.
inline double loss(const NetworkParams& p, const Eigen::MatrixXd& inputs,
                   const Eigen::MatrixXd& targets) {
  detail::check_sample_dims(p, inputs, targets);
  const Eigen::MatrixXd r = detail::residual_matrix(p, inputs, targets);
  return r.squaredNorm() / static_cast<double>(r.rows() * r.cols());
}

struct ResidualsJacobian {
  Eigen::VectorXd e;  // N*d3, ordered sample-major then output component
  Eigen::MatrixXd j;  // (N*d3) x n_params, columns in flat parameter order
};

/// Explicit residual vector and analytic Jacobian. The row for sample i,
/// output j is i*d3 + j; columns follow the flat parameter order.
inline ResidualsJacobian residuals_and_jacobian(const NetworkParams& p,
                                                const Eigen::MatrixXd& inputs,
                                                const Eigen::MatrixXd& targets) {
  detail::check_sample_dims(p, inputs, targets);
  const NetworkShape s = p.shape();
  const int n = static_cast<int>(inputs.rows());
  const int ob1 = s.d2 * s.d1;
  const int ow2 = ob1 + s.d2;
  const int ob2 = ow2 + s.d3 * s.d2;

  ResidualsJacobian out;
  out.e.resize(n * s.d3);
  out.j = Eigen::MatrixXd::Zero(n * s.d3, s.n_params());

  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd x = inputs.row(i).transpose();
    const Eigen::VectorXd a = hidden_layer(p, x);
    const Eigen::VectorXd u =
        (Eigen::VectorXd::Ones(s.d2) - a.cwiseProduct(a));
    const Eigen::VectorXd h = p.w2 * a + p.b2;
    for (int j = 0; j < s.d3; ++j) {
      const int row = i * s.d3 + j;
      out.e[row] = h[j] - targets(i, j);
      for (int k = 0; k < s.d2; ++k) {
        const double gate = p.w2(j, k) * u[k];
        for (int l = 0; l < s.d1; ++l)
          out.j(row, k * s.d1 + l) = gate * x[l];
        out.j(row, ob1 + k) = gate;
        out.j(row, ow2 + j * s.d2 + k) = a[k];
      }
      out.j(row, ob2 + j) = 1.0;
    }
  }
  return out;
}

struct NormalEquations {
  Eigen::MatrixXd jtj;  // n_params x n_params
  Eigen::VectorXd jte;  // n_params
};

/// J^T J and J^T e accumulated sample by sample without materializing J.
/// Per sample the Jacobian factors through U = W2 * diag(1 - a^2), which
/// turns every block into a small outer product.
inline NormalEquations normal_equations(const NetworkParams& p,
                                        const Eigen::MatrixXd& inputs,
                                        const Eigen::MatrixXd& targets) {
  detail::check_sample_dims(p, inputs, targets);
  const NetworkShape s = p.shape();
  const int n = static_cast<int>(inputs.rows());
  const int np = s.n_params();
  const int ob1 = s.d2 * s.d1;
  const int ow2 = ob1 + s.d2;
  const int ob2 = ow2 + s.d3 * s.d2;

  NormalEquations out;
  out.jtj = Eigen::MatrixXd::Zero(np, np);
  out.jte = Eigen::VectorXd::Zero(np);
  Eigen::MatrixXd& A = out.jtj;

  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd x = inputs.row(i).transpose();
    const Eigen::VectorXd a = hidden_layer(p, x);
    const Eigen::VectorXd u =
        (Eigen::VectorXd::Ones(s.d2) - a.cwiseProduct(a));
    const Eigen::VectorXd r = p.w2 * a + p.b2 - targets.row(i).transpose();

    const Eigen::MatrixXd uu = p.w2 * u.asDiagonal();       // d3 x d2
    const Eigen::MatrixXd hh = uu.transpose() * uu;          // d2 x d2
    const Eigen::VectorXd grad_hidden = uu.transpose() * r;  // d2
    const Eigen::MatrixXd xx = x * x.transpose();            // d1 x d1
    const Eigen::MatrixXd xa = x * a.transpose();            // d1 x d2
    const Eigen::MatrixXd aa = a * a.transpose();            // d2 x d2

    for (int k = 0; k < s.d2; ++k) {
      for (int k2 = k; k2 < s.d2; ++k2)
        A.block(k * s.d1, k2 * s.d1, s.d1, s.d1) += hh(k, k2) * xx;
      for (int k2 = 0; k2 < s.d2; ++k2)
        A.block(k * s.d1, ob1 + k2, s.d1, 1) += hh(k, k2) * x;
      for (int j = 0; j < s.d3; ++j) {
        A.block(k * s.d1, ow2 + j * s.d2, s.d1, s.d2) += uu(j, k) * xa;
        A.block(k * s.d1, ob2 + j, s.d1, 1) += uu(j, k) * x;
      }
      out.jte.segment(k * s.d1, s.d1) += grad_hidden[k] * x;
    }
    A.block(ob1, ob1, s.d2, s.d2) += hh;
    for (int j = 0; j < s.d3; ++j) {
      A.block(ob1, ow2 + j * s.d2, s.d2, s.d2) +=
          uu.row(j).transpose() * a.transpose();
      A.block(ob1, ob2 + j, s.d2, 1) += uu.row(j).transpose();
      A.block(ow2 + j * s.d2, ow2 + j * s.d2, s.d2, s.d2) += aa;
      A.block(ow2 + j * s.d2, ob2 + j, s.d2, 1) += a;
      A(ob2 + j, ob2 + j) += 1.0;
      out.jte.segment(ow2 + j * s.d2, s.d2) += r[j] * a;
    }
    out.jte.segment(ob1, s.d2) += grad_hidden;
    out.jte.segment(ob2, s.d3) += r;
  }

  A = A.selfadjointView<Eigen::Upper>();
  return out;
}

// ---- damped least-squares step ----

/// theta' = theta - (J^T J + mu I)^-1 J^T e. At mu = 0 this is the pure
/// Gauss-Newton step and fails if the normal equations are singular.
inline Eigen::VectorXd lm_step(const Eigen::VectorXd& theta,
                               const Eigen::MatrixXd& jac,
                               const Eigen::VectorXd& e, double mu) {
  require(mu >= 0.0, "damping must be nonnegative");
  require(jac.cols() == theta.size(), "jacobian column count mismatch");
  require(jac.rows() == e.size(), "jacobian row count mismatch");
  Eigen::MatrixXd a = jac.transpose() * jac;
  a.diagonal().array() += mu;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
  if (!lu.isInvertible())
    fail("singular damped normal equations; increase the damping");
  return theta - lu.solve(jac.transpose() * e);
}

inline NetworkParams lm_step(const NetworkParams& p,
                             const Eigen::MatrixXd& jac,
                             const Eigen::VectorXd& e, double mu) {
  return NetworkParams::unflatten(p.shape(), lm_step(p.flatten(), jac, e, mu));
}

// ---- scaling ----

/// Componentwise affine map onto [-1, 1]; constant components map to 0
/// forward and back to the constant on inversion.
struct ScalingSpec {
  std::vector<double> lo;
  std::vector<double> hi;

  int dims() const { return static_cast<int>(lo.size()); }

  void validate() const {
    require(lo.size() == hi.size() && !lo.empty(), "bad scaling spec");
    for (size_t c = 0; c < lo.size(); ++c)
      require(hi[c] >= lo[c], "scaling max must be >= min");
  }
};

inline ScalingSpec fit_scaler(const std::vector<std::vector<double>>& rows) {
  require(!rows.empty(), "scaler needs at least one vector");
  const size_t dims = rows[0].size();
  require(dims >= 1, "scaler needs at least one component");
  ScalingSpec s;
  s.lo.assign(dims, std::numeric_limits<double>::infinity());
  s.hi.assign(dims, -std::numeric_limits<double>::infinity());
  for (const auto& row : rows) {
    require(row.size() == dims, "inconsistent vector widths");
    for (size_t c = 0; c < dims; ++c) {
      s.lo[c] = std::min(s.lo[c], row[c]);
      s.hi[c] = std::max(s.hi[c], row[c]);
    }
  }
  s.validate();
  return s;
}

inline std::vector<double> apply_scaler(const ScalingSpec& s,
                                        const std::vector<double>& x) {
  require(static_cast<int>(x.size()) == s.dims(), "scaler width mismatch");
  std::vector<double> out(x.size());
  for (size_t c = 0; c < x.size(); ++c) {
    const double span = s.hi[c] - s.lo[c];
    out[c] = span > 0.0 ? 2.0 * (x[c] - s.lo[c]) / span - 1.0 : 0.0;
  }
  return out;
}

inline std::vector<double> invert_scaler(const ScalingSpec& s,
                                         const std::vector<double>& x) {
  require(static_cast<int>(x.size()) == s.dims(), "scaler width mismatch");
  std::vector<double> out(x.size());
  for (size_t c = 0; c < x.size(); ++c)
    out[c] = s.lo[c] + (x[c] + 1.0) * 0.5 * (s.hi[c] - s.lo[c]);
  return out;
}

// ---- training ----

struct TrainingOptions {
  int max_epochs = 1000;
  int max_validation_failures = 6;
  double initial_damping = 1e-3;
  double damping_decrease = 10.0;  // divide on an accepted step
  double damping_increase = 10.0;  // multiply on a rejected step
  double damping_cap = 1e10;       // give up beyond this
  double train_fraction = 0.7;
};

struct TrainingLog {
  int epochs = 0;  // accepted update cycles
  double final_train_loss = std::numeric_limits<double>::quiet_NaN();
  double best_validation_loss = std::numeric_limits<double>::quiet_NaN();
  std::string stop_reason;
  std::string scaler_fit = "full dataset";
  std::uint64_t seed = 0;
  std::vector<double> train_loss_history;  // one entry per accepted epoch
};

struct TrainedNetwork {
  NetworkShape shape;
  NetworkParams params;
  ScalingSpec input_scaler;
  ScalingSpec target_scaler;
  TrainingLog log;

  /// Physical units in, physical units out.
  std::vector<double> predict(const std::vector<double>& x) const {
    const auto scaled = apply_scaler(input_scaler, x);
    const Eigen::VectorXd y = forward(
        params, Eigen::Map<const Eigen::VectorXd>(scaled.data(),
                                                  scaled.size()));
    return invert_scaler(target_scaler,
                         std::vector<double>(y.data(), y.data() + y.size()));
  }
};

namespace detail {

inline Eigen::MatrixXd scaled_matrix(const ScalingSpec& spec,
                                     const std::vector<std::vector<double>>& rows,
                                     const std::vector<int>& pick) {
  Eigen::MatrixXd m(pick.size(), spec.dims());
  for (size_t r = 0; r < pick.size(); ++r) {
    const auto scaled = apply_scaler(spec, rows[pick[r]]);
    for (int c = 0; c < spec.dims(); ++c) m(r, c) = scaled[c];
  }
  return m;
}

// Nguyen-Widrow layer initialization: unit weight vectors scaled to
// 0.7 n^(1/f) with biases spread evenly so the units tile the scaled
// input range instead of clustering near the origin.
inline void nguyen_widrow(Eigen::MatrixXd& w, Eigen::VectorXd& b, Rng& rng) {
  const int n = static_cast<int>(w.rows());
  const int f = static_cast<int>(w.cols());
  const double beta =
      0.7 * std::pow(static_cast<double>(n), 1.0 / static_cast<double>(f));
  for (int r = 0; r < n; ++r) {
    double norm = 0.0;
    do {
      for (int c = 0; c < f; ++c) w(r, c) = rng.uniform(-1.0, 1.0);
      norm = w.row(r).norm();
    } while (norm == 0.0);
    w.row(r) *= beta / norm;
    const double spread =
        n == 1 ? 0.0 : -1.0 + 2.0 * r / static_cast<double>(n - 1);
    b[r] = beta * spread * (w(r, 0) < 0.0 ? -1.0 : 1.0);
  }
}

inline NetworkParams random_init(const NetworkShape& s, Rng& rng) {
  NetworkParams p = NetworkParams::zeros(s);
  nguyen_widrow(p.w1, p.b1, rng);
  nguyen_widrow(p.w2, p.b2, rng);
  return p;
}

}  // namespace detail

/// Full-batch damped least-squares training with early stopping. Scalers
/// are fitted on the complete provided dataset (recorded in the log); the
/// split into training and validation rows is seeded and random; the
/// returned parameters are those with the lowest validation loss.
inline TrainedNetwork train(const std::vector<std::vector<double>>& inputs,
                            const std::vector<std::vector<double>>& targets,
                            const NetworkShape& shape,
                            const TrainingOptions& opt, std::uint64_t seed) {
  shape.validate();
  const int n = static_cast<int>(inputs.size());
  require(n == static_cast<int>(targets.size()),
          "inputs and targets must pair up");
  require(n >= 10, "training requires at least 10 samples");
  for (const auto& row : inputs)
    require(static_cast<int>(row.size()) == shape.d1, "input width mismatch");
  for (const auto& row : targets)
    require(static_cast<int>(row.size()) == shape.d3, "target width mismatch");

  TrainedNetwork net;
  net.shape = shape;
  net.input_scaler = fit_scaler(inputs);
  net.target_scaler = fit_scaler(targets);
  net.log.seed = seed;

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng split_rng(derive_seed(seed, 0));
  for (int i = n - 1; i > 0; --i) {
    int j = static_cast<int>(split_rng.below(static_cast<std::uint64_t>(i) + 1));
    std::swap(order[i], order[j]);
  }
  const int n_train =
      static_cast<int>(std::lround(opt.train_fraction * n));
  require(n_train >= 1 && n_train < n,
          "split leaves an empty training or validation set");
  const std::vector<int> train_rows(order.begin(), order.begin() + n_train);
  const std::vector<int> val_rows(order.begin() + n_train, order.end());

  const Eigen::MatrixXd xt =
      detail::scaled_matrix(net.input_scaler, inputs, train_rows);
  const Eigen::MatrixXd yt =
      detail::scaled_matrix(net.target_scaler, targets, train_rows);
  const Eigen::MatrixXd xv =
      detail::scaled_matrix(net.input_scaler, inputs, val_rows);
  const Eigen::MatrixXd yv =
      detail::scaled_matrix(net.target_scaler, targets, val_rows);

  Rng init_rng(derive_seed(seed, 1));
  NetworkParams params = detail::random_init(shape, init_rng);
  double train_loss = loss(params, xt, yt);
  require(std::isfinite(train_loss), "non-finite training loss at epoch 0");

  NetworkParams best_params = params;
  double best_val = loss(params, xv, yv);
  double mu = opt.initial_damping;
  int val_failures = 0;
  net.log.stop_reason = "max epochs";

  for (int epoch = 1; epoch <= opt.max_epochs; ++epoch) {
    const NormalEquations ne = normal_equations(params, xt, yt);
    bool accepted = false;
    while (true) {
      Eigen::MatrixXd a = ne.jtj;
      a.diagonal().array() += mu;
      const Eigen::VectorXd step =
          a.selfadjointView<Eigen::Upper>().ldlt().solve(ne.jte);
      if (step.allFinite()) {
        const NetworkParams candidate =
            NetworkParams::unflatten(shape, params.flatten() - step);
        const double cand_loss = loss(candidate, xt, yt);
        if (std::isfinite(cand_loss) && cand_loss < train_loss) {
          params = candidate;
          train_loss = cand_loss;
          mu = std::max(mu / opt.damping_decrease,
                        std::numeric_limits<double>::min());
          accepted = true;
          break;
        }
      }
      mu *= opt.damping_increase;
      if (mu > opt.damping_cap) break;
    }
    if (!accepted) {
      net.log.stop_reason = "damping exceeded cap";
      break;
    }
    if (!std::isfinite(train_loss))
      fail("non-finite training loss at epoch " + std::to_string(epoch));
    net.log.epochs = epoch;
    net.log.train_loss_history.push_back(train_loss);

    const double val = loss(params, xv, yv);
    if (val < best_val) {
      best_val = val;
      best_params = params;
      val_failures = 0;
    } else if (++val_failures >= opt.max_validation_failures) {
      net.log.stop_reason = "validation failures";
      break;
    }
  }

  net.params = best_params;
  net.log.best_validation_loss = best_val;
  net.log.final_train_loss = loss(best_params, xt, yt);
  return net;
}

// ---- ensembles ----

struct Ensemble {
  std::vector<TrainedNetwork> members;

  int size() const { return static_cast<int>(members.size()); }

  void validate() const {
    require(size() >= 2, "ensemble needs at least 2 members for a spread");
    for (const auto& m : members) {
      require(m.shape.d1 == members[0].shape.d1 &&
                  m.shape.d3 == members[0].shape.d3,
              "ensemble members must agree on input and output widths");
    }
  }
};

/// Independently seeded trainings over the same dataset; both the split
/// and the initialization differ per member. Member order is fixed by the
/// seed derivation, so results do not depend on scheduling.
inline Ensemble train_ensemble(const std::vector<std::vector<double>>& inputs,
                               const std::vector<std::vector<double>>& targets,
                               const NetworkShape& shape,
                               const TrainingOptions& opt, int n_members,
                               std::uint64_t base_seed, int n_jobs = 1) {
  require(n_members >= 2, "ensemble needs at least 2 members for a spread");
  Ensemble ens;
  ens.members.resize(n_members);
  if (n_jobs <= 1) {
    for (int r = 0; r < n_members; ++r)
      ens.members[r] =
          train(inputs, targets, shape, opt, derive_seed(base_seed, r));
  } else {
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    for (int t = 0; t < std::min(n_jobs, n_members); ++t)
      pool.emplace_back([&] {
        for (int r = next.fetch_add(1); r < n_members; r = next.fetch_add(1))
          ens.members[r] =
              train(inputs, targets, shape, opt, derive_seed(base_seed, r));
      });
    for (auto& th : pool) th.join();
  }
  ens.validate();
  return ens;
}

struct EnsemblePrediction {
  std::vector<double> mean;  // physical units
  std::vector<double> sd_t;  // sample standard deviation over members
};

/// Each member predicts in physical units; the ensemble reports their
/// componentwise mean and the (N_R - 1)-normalized standard deviation.
inline EnsemblePrediction predict_ensemble(const Ensemble& ens,
                                           const std::vector<double>& x) {
  ens.validate();
  const int nr = ens.size();
  std::vector<std::vector<double>> outs;
  outs.reserve(nr);
  for (const auto& m : ens.members) outs.push_back(m.predict(x));
  const size_t dims = outs[0].size();

  EnsemblePrediction pred;
  pred.mean.assign(dims, 0.0);
  pred.sd_t.assign(dims, 0.0);
  for (const auto& o : outs)
    for (size_t c = 0; c < dims; ++c) pred.mean[c] += o[c];
  for (double& m : pred.mean) m /= nr;
  for (const auto& o : outs)
    for (size_t c = 0; c < dims; ++c) {
      const double dev = o[c] - pred.mean[c];
      pred.sd_t[c] += dev * dev;
    }
  for (double& s : pred.sd_t) s = std::sqrt(s / (nr - 1));
  return pred;
}

}  // namespace plume
