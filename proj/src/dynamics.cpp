#include "alignmap/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <unordered_map>

#include "alignmap/errors.hpp"
#include "alignmap/io_util.hpp"
#include "alignmap/rng.hpp"

namespace alignmap {

ToyPolicy ToyPolicy::random(std::vector<std::string> vocab, std::uint64_t seed, double scale) {
  if (vocab.empty()) throw ValidationError("policy vocabulary must be non-empty");
  ToyPolicy policy;
  policy.vocab = std::move(vocab);
  const auto v = static_cast<Eigen::Index>(policy.vocab.size());
  policy.params.resize(v, v);
  Rng rng(seed);
  for (Eigen::Index i = 0; i < v; ++i) {
    for (Eigen::Index j = 0; j < v; ++j) policy.params(i, j) = scale * rng.normal();
  }
  return policy;
}

std::vector<std::size_t> tokenize(const ToyPolicy& policy, const std::string& text) {
  std::unordered_map<std::string, std::size_t> index;
  index.reserve(policy.vocab.size());
  for (std::size_t i = 0; i < policy.vocab.size(); ++i) index[policy.vocab[i]] = i;
  std::vector<std::size_t> seq;
  std::istringstream in(text);
  std::string token;
  while (in >> token) {
    const auto it = index.find(token);
    if (it == index.end()) throw ValidationError("unknown symbol '" + token + "'");
    seq.push_back(it->second);
  }
  return seq;
}

/// Sum of log softmax(params.row(prev))[next] along the sequence, starting
/// from row 0. When grad is given, accumulates d(logprob)/d(params) into it.
static double logprob_impl(const Eigen::MatrixXd& params, const std::vector<std::size_t>& seq,
                           Eigen::MatrixXd* grad) {
  if (seq.empty()) throw ValidationError("sequence must have at least one symbol");
  const auto v = static_cast<std::size_t>(params.rows());
  double lp = 0.0;
  std::size_t ctx = 0;
  for (const std::size_t next : seq) {
    if (next >= v) {
      throw ValidationError("symbol index " + std::to_string(next) + " outside vocabulary of " +
                            std::to_string(v));
    }
    const auto row = static_cast<Eigen::Index>(ctx);
    const Eigen::VectorXd z = params.row(row);
    const double zmax = z.maxCoeff();
    const Eigen::VectorXd e = (z.array() - zmax).exp();
    const double esum = e.sum();
    lp += z[static_cast<Eigen::Index>(next)] - (zmax + std::log(esum));
    if (grad) {
      grad->row(row) -= (e / esum).transpose();
      (*grad)(row, static_cast<Eigen::Index>(next)) += 1.0;
    }
    ctx = next;
  }
  return lp;
}

static void check_policy(const ToyPolicy& policy) {
  if (policy.vocab.empty()) throw ValidationError("policy vocabulary must be non-empty");
  if (policy.params.rows() != policy.params.cols() ||
      policy.params.rows() != static_cast<Eigen::Index>(policy.vocab.size())) {
    throw ValidationError("policy params must be a VxV matrix matching the vocabulary");
  }
  if (!policy.params.allFinite()) throw ValidationError("policy params must be finite");
}

double seq_logprob(const ToyPolicy& policy, const std::vector<std::size_t>& seq) {
  check_policy(policy);
  return logprob_impl(policy.params, seq, nullptr);
}

double seq_logprob_normalized(const ToyPolicy& policy, const std::vector<std::size_t>& seq) {
  return seq_logprob(policy, seq) / static_cast<double>(seq.size());
}

PairSeqs make_pair_seqs(const ToyPolicy& policy, const TrainingPair& pair) {
  PairSeqs seqs;
  seqs.id = pair.id;
  seqs.chosen = tokenize(policy, pair.chosen);
  seqs.rejected = tokenize(policy, pair.rejected);
  if (seqs.chosen.empty() || seqs.rejected.empty()) {
    throw ValidationError("pair '" + pair.id + "': empty sequence after tokenization");
  }
  return seqs;
}

std::vector<std::string> build_vocab(const std::vector<TrainingPair>& pairs) {
  std::set<std::string> symbols;
  for (const auto& pair : pairs) {
    for (const auto* text : {&pair.chosen, &pair.rejected}) {
      std::istringstream in(*text);
      std::string token;
      while (in >> token) symbols.insert(token);
    }
  }
  if (symbols.empty()) throw ValidationError("no symbols in any training pair");
  return {symbols.begin(), symbols.end()};
}

Objective objective_from_string(const std::string& s) {
  if (s == "simpo") return Objective::Simpo;
  if (s == "dpo") return Objective::Dpo;
  throw ValidationError("unknown objective '" + s + "' (expected simpo|dpo)");
}

std::string to_string(Objective o) { return o == Objective::Simpo ? "simpo" : "dpo"; }

static void check_config(const LossConfig& cfg) {
  if (cfg.beta <= 0.0) throw ValidationError("beta must be positive");
  if (cfg.gamma < 0.0) throw ValidationError("gamma must be >= 0");
  if (cfg.learning_rate <= 0.0) throw ValidationError("learning rate must be positive");
}

static double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

static double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double simpo_rho(const ToyPolicy& policy, const PairSeqs& pair, const LossConfig& cfg) {
  check_policy(policy);
  check_config(cfg);
  const double lw = logprob_impl(policy.params, pair.chosen, nullptr) /
                    static_cast<double>(pair.chosen.size());
  const double ll = logprob_impl(policy.params, pair.rejected, nullptr) /
                    static_cast<double>(pair.rejected.size());
  return (cfg.beta * lw - cfg.beta * ll) - cfg.gamma;
}

Eigen::MatrixXd simpo_direction(const ToyPolicy& policy, const PairSeqs& pair) {
  check_policy(policy);
  const Eigen::Index v = policy.params.rows();
  Eigen::MatrixXd gw = Eigen::MatrixXd::Zero(v, v);
  Eigen::MatrixXd gl = Eigen::MatrixXd::Zero(v, v);
  logprob_impl(policy.params, pair.chosen, &gw);
  logprob_impl(policy.params, pair.rejected, &gl);
  return gw / static_cast<double>(pair.chosen.size()) -
         gl / static_cast<double>(pair.rejected.size());
}

double simpo_loss(const ToyPolicy& policy, const PairSeqs& pair, const LossConfig& cfg) {
  return softplus(-simpo_rho(policy, pair, cfg));
}

Eigen::MatrixXd simpo_grad(const ToyPolicy& policy, const PairSeqs& pair,
                           const LossConfig& cfg) {
  const double rho = simpo_rho(policy, pair, cfg);
  return (-cfg.beta * sigmoid(-rho)) * simpo_direction(policy, pair);
}

static const Eigen::MatrixXd& dpo_reference(const ToyPolicy& policy) {
  if (!policy.reference) throw ValidationError("DPO needs a reference policy snapshot");
  if (policy.reference->rows() != policy.params.rows() ||
      policy.reference->cols() != policy.params.cols()) {
    throw ValidationError("reference policy shape does not match the policy");
  }
  return *policy.reference;
}

static double dpo_h(const ToyPolicy& policy, const PairSeqs& pair, const LossConfig& cfg) {
  const Eigen::MatrixXd& ref = dpo_reference(policy);
  const double lw = logprob_impl(policy.params, pair.chosen, nullptr);
  const double ll = logprob_impl(policy.params, pair.rejected, nullptr);
  const double rw = logprob_impl(ref, pair.chosen, nullptr);
  const double rl = logprob_impl(ref, pair.rejected, nullptr);
  return cfg.beta * ((lw - rw) - (ll - rl));
}

double dpo_loss(const ToyPolicy& policy, const PairSeqs& pair, const LossConfig& cfg) {
  check_policy(policy);
  check_config(cfg);
  return softplus(-dpo_h(policy, pair, cfg));
}

Eigen::MatrixXd dpo_grad(const ToyPolicy& policy, const PairSeqs& pair, const LossConfig& cfg) {
  check_policy(policy);
  check_config(cfg);
  const double h = dpo_h(policy, pair, cfg);
  const Eigen::Index v = policy.params.rows();
  Eigen::MatrixXd gw = Eigen::MatrixXd::Zero(v, v);
  Eigen::MatrixXd gl = Eigen::MatrixXd::Zero(v, v);
  logprob_impl(policy.params, pair.chosen, &gw);
  logprob_impl(policy.params, pair.rejected, &gl);
  return (-cfg.beta * sigmoid(-h)) * (gw - gl);
}

DynamicsTrace run_dynamics(ToyPolicy& policy, const std::vector<PairSeqs>& pairs,
                           const LossConfig& cfg) {
  check_policy(policy);
  check_config(cfg);
  if (pairs.empty()) throw ValidationError("dynamics needs at least one pair");
  const Eigen::Index v = policy.params.rows();
  for (const auto& pair : pairs) {
    if (pair.chosen.empty() || pair.rejected.empty()) {
      throw ValidationError("pair '" + pair.id + "': empty sequence");
    }
  }
  if (cfg.objective == Objective::Dpo && !policy.reference) policy.snapshot_reference();

  // Reference logprobs are fixed for the whole run; compute them once.
  std::vector<std::pair<double, double>> ref_lps;
  if (cfg.objective == Objective::Dpo) {
    const Eigen::MatrixXd& ref = dpo_reference(policy);
    ref_lps.reserve(pairs.size());
    for (const auto& pair : pairs) {
      ref_lps.emplace_back(logprob_impl(ref, pair.chosen, nullptr),
                           logprob_impl(ref, pair.rejected, nullptr));
    }
  }

  const double count = static_cast<double>(pairs.size());
  DynamicsTrace trace;
  trace.rows.reserve(cfg.steps + 1);
  Eigen::MatrixXd gw(v, v), gl(v, v);
  for (std::size_t step = 0; step <= cfg.steps; ++step) {
    double acc = 0.0, margin = 0.0, chosen_lp = 0.0, rejected_lp = 0.0, loss = 0.0;
    Eigen::MatrixXd batch_grad = Eigen::MatrixXd::Zero(v, v);
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      const auto& pair = pairs[p];
      gw.setZero();
      gl.setZero();
      const double lw = logprob_impl(policy.params, pair.chosen, &gw);
      const double ll = logprob_impl(policy.params, pair.rejected, &gl);
      const double lw_len = static_cast<double>(pair.chosen.size());
      const double ll_len = static_cast<double>(pair.rejected.size());
      const double nw = lw / lw_len;
      const double nl = ll / ll_len;
      acc += nw > nl ? 1.0 : (nw == nl ? 0.5 : 0.0);
      margin += nw - nl;
      chosen_lp += nw;
      rejected_lp += nl;
      if (cfg.objective == Objective::Simpo) {
        const double rho = (cfg.beta * nw - cfg.beta * nl) - cfg.gamma;
        loss += softplus(-rho);
        batch_grad += (-cfg.beta * sigmoid(-rho)) * (gw / lw_len - gl / ll_len);
      } else {
        const double h = cfg.beta * ((lw - ref_lps[p].first) - (ll - ref_lps[p].second));
        loss += softplus(-h);
        batch_grad += (-cfg.beta * sigmoid(-h)) * (gw - gl);
      }
    }
    batch_grad /= count;
    if (!std::isfinite(loss) || !batch_grad.allFinite()) {
      throw ValidationError("dynamics diverged at step " + std::to_string(step) +
                            " (non-finite loss or gradient)");
    }
    trace.rows.push_back({step, acc / count, margin / count, batch_grad.norm(),
                          chosen_lp / count, rejected_lp / count});
    if (step < cfg.steps) policy.params -= cfg.learning_rate * batch_grad;
  }
  return trace;
}

DynamicsTrace run_dynamics(const std::vector<TrainingPair>& pairs, const LossConfig& cfg,
                           ToyPolicy* trained) {
  if (pairs.empty()) throw ValidationError("dynamics needs at least one pair");
  ToyPolicy policy = ToyPolicy::random(build_vocab(pairs), cfg.seed, cfg.init_scale);
  std::vector<PairSeqs> seqs;
  seqs.reserve(pairs.size());
  for (const auto& pair : pairs) seqs.push_back(make_pair_seqs(policy, pair));
  DynamicsTrace trace = run_dynamics(policy, seqs, cfg);
  if (trained) *trained = std::move(policy);
  return trace;
}

void write_trace_csv(const DynamicsTrace& trace, const std::filesystem::path& path) {
  std::string out = "step,accuracy,margin,grad_norm,chosen_lp,rejected_lp\n";
  for (const auto& row : trace.rows) {
    out += std::to_string(row.step);
    out += ',';
    out += fmt_double(row.accuracy);
    out += ',';
    out += fmt_double(row.margin);
    out += ',';
    out += fmt_double(row.grad_norm);
    out += ',';
    out += fmt_double(row.chosen_lp);
    out += ',';
    out += fmt_double(row.rejected_lp);
    out += '\n';
  }
  atomic_write(path, out);
}

}  // namespace alignmap
