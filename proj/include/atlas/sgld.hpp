#pragma once

#include <cstdint>
#include <vector>

#include "atlas/model.hpp"
#include "atlas/rng.hpp"

namespace atlas {

struct SGLDConfig {
  double eps = 0.001;     // step size
  double gamma = 300.0;   // localization strength
  double nbeta = 30.0;    // inverse-temperature product
  int batch_size = 16;    // minibatch size for the gradient estimate
  int chains = 4;
  int draws = 100;        // recorded draws per chain
  int burn_in = 0;        // discarded leading draws per chain
  std::uint64_t seed = 0;

  void validate() const;
};

/// Functionals recorded after one SGLD step: the evaluation-set loss shift
/// and every sample's centered loss.
struct DrawRecord {
  int chain = 0;
  int draw = 0;                // post burn-in index within the chain
  double delta_L = 0.0;        // Lhat(w_t) - Lhat(w*)
  std::vector<double> delta_l; // l_i(w_t) - Lhat(w_t)
};

/// What the sampler needs from a model: minibatch gradients for the update
/// rule and per-sample losses on a fixed evaluation set.
class LossModel {
 public:
  virtual ~LossModel() = default;
  virtual std::size_t dim() const = 0;
  virtual std::size_t eval_count() const = 0;
  /// Gradient of the minibatch mean loss at w; `data_rng` drives batch choice.
  virtual void grad_minibatch(const std::vector<double>& w, int batch_size, Rng& data_rng,
                              std::vector<double>& grad_out) const = 0;
  /// Per-sample losses on the fixed evaluation set.
  virtual void eval_losses(const std::vector<double>& w, std::vector<double>& out) const = 0;
};

struct ChainFailure {
  int chain = 0;
  int step = 0;
  std::string reason;
};

struct SgldResult {
  std::vector<DrawRecord> draws;       // pooled post-burn-in records, chain-major
  std::vector<ChainFailure> failures;  // aborted chains, if any
};

/// Runs `config.chains` independent localized SGLD chains restricted to
/// `component`, all starting at w*. Coordinates outside the component stay
/// bit-equal to w*. Each step updates j in the component by
///   w_j <- w_j - (eps/2) * (nbeta * dL_batch/dw_j + gamma * (w_j - w*_j)) + N(0, eps)
/// and then records the evaluation functionals. Chains use streams derived
/// from (seed, chain), so results do not depend on scheduling.
SgldResult sgld_restricted_chain(const std::vector<double>& w_star, const ComponentSpec& component,
                                 const LossModel& model, const SGLDConfig& config,
                                 int threads = 1);

}  // namespace atlas
