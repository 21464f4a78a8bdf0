#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "alignmap/selection.hpp"

namespace alignmap {

/// Bigram softmax model over a fixed vocabulary: params(i, j) is the logit of
/// symbol j following symbol i, and sequences start from the row of vocab[0].
struct ToyPolicy {
  std::vector<std::string> vocab;
  Eigen::MatrixXd params;                    // V x V logits
  std::optional<Eigen::MatrixXd> reference;  // frozen snapshot, required by DPO

  static ToyPolicy random(std::vector<std::string> vocab, std::uint64_t seed,
                          double scale = 0.1);
  void snapshot_reference() { reference = params; }
};

/// Whitespace-split text mapped to vocab indices; unknown symbols are errors.
std::vector<std::size_t> tokenize(const ToyPolicy& policy, const std::string& text);

double seq_logprob(const ToyPolicy& policy, const std::vector<std::size_t>& seq);
double seq_logprob_normalized(const ToyPolicy& policy, const std::vector<std::size_t>& seq);

struct PairSeqs {
  std::string id;
  std::vector<std::size_t> chosen;
  std::vector<std::size_t> rejected;
};

PairSeqs make_pair_seqs(const ToyPolicy& policy, const TrainingPair& pair);

/// Sorted unique whitespace tokens over all chosen/rejected texts.
std::vector<std::string> build_vocab(const std::vector<TrainingPair>& pairs);

enum class Objective { Simpo, Dpo };

Objective objective_from_string(const std::string& s);
std::string to_string(Objective o);

struct LossConfig {
  Objective objective = Objective::Simpo;
  double beta = 2.0;
  double gamma = 1.0;      // target margin, 0.5 * beta by default
  double learning_rate = 0.05;
  std::size_t steps = 200;
  std::uint64_t seed = 42;
  double init_scale = 0.1;
};

/// rho = (beta/|y_w|) log pi(y_w) - (beta/|y_l|) log pi(y_l) - gamma.
double simpo_rho(const ToyPolicy& policy, const PairSeqs& pair, const LossConfig& cfg);

/// d = grad log pi(y_w)/|y_w| - grad log pi(y_l)/|y_l|.
Eigen::MatrixXd simpo_direction(const ToyPolicy& policy, const PairSeqs& pair);

double simpo_loss(const ToyPolicy& policy, const PairSeqs& pair, const LossConfig& cfg);

/// Analytic gradient, assembled as -beta * sigmoid(-rho) * d.
Eigen::MatrixXd simpo_grad(const ToyPolicy& policy, const PairSeqs& pair, const LossConfig& cfg);

double dpo_loss(const ToyPolicy& policy, const PairSeqs& pair, const LossConfig& cfg);
Eigen::MatrixXd dpo_grad(const ToyPolicy& policy, const PairSeqs& pair, const LossConfig& cfg);

struct TraceRow {
  std::size_t step = 0;
  double accuracy = 0.0;   // chosen beats rejected on normalized logprob; ties 0.5
  double margin = 0.0;     // mean normalized logprob difference
  double grad_norm = 0.0;  // Frobenius norm of the full-batch gradient
  double chosen_lp = 0.0;
  double rejected_lp = 0.0;
};

struct DynamicsTrace {
  std::vector<TraceRow> rows;  // rows[0] = metrics before any update; steps+1 rows
};

/// Full-batch gradient descent for cfg.steps updates. The final row's
/// gradient is measured but not applied. DPO snapshots the reference policy
/// at entry when none is set. Throws on non-finite loss (divergence guard).
DynamicsTrace run_dynamics(ToyPolicy& policy, const std::vector<PairSeqs>& pairs,
                           const LossConfig& cfg);

/// Builds a seeded policy over the pairs' vocabulary, then trains it.
DynamicsTrace run_dynamics(const std::vector<TrainingPair>& pairs, const LossConfig& cfg,
                           ToyPolicy* trained = nullptr);

void write_trace_csv(const DynamicsTrace& trace, const std::filesystem::path& path);

}  // namespace alignmap
