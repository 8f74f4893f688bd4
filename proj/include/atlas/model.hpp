#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "atlas/corpus.hpp"

namespace atlas {

struct ModelConfig {
  int n_layers = 2;
  int heads_per_layer = 8;
  int d_model = 64;
  int d_head = 8;
  int vocab_size = 512;
  int max_context = 64;
  bool layernorm = true;
  std::string positional = "learned";

  void validate() const;  // throws std::invalid_argument on violation
  bool operator==(const ModelConfig&) const = default;
};

struct Segment {
  std::string name;
  std::size_t offset = 0;
  std::size_t size = 0;
};

/// Flat parameter array with a named segment table. Segments are disjoint
/// and cover the array.
class ParamVector {
 public:
  ParamVector() = default;
  ParamVector(std::shared_ptr<const std::vector<Segment>> segments, std::vector<double> values);

  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }
  std::size_t size() const { return values_.size(); }
  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  const std::vector<Segment>& segments() const { return *segments_; }
  std::shared_ptr<const std::vector<Segment>> segment_table() const { return segments_; }
  const Segment& segment(std::string_view name) const;
  bool all_finite() const;

 private:
  std::shared_ptr<const std::vector<Segment>> segments_;
  std::vector<double> values_;
};

/// A named weight subset (here: one attention head's Q/K/V/O block).
struct ComponentSpec {
  std::string name;           // "l:h"
  std::vector<std::size_t> indices;  // sorted, in bounds, non-empty
};

struct LossRecord {
  std::vector<double> per_sample;  // l_i >= 0
  double mean = 0.0;               // arithmetic mean of per_sample
};

/// Two-layer-style attention-only transformer: token + learned positional
/// embeddings, per-head Q/K/V/O self-attention with causal masking, optional
/// pre-attention and final layer norm, tied to nothing. The loss is the
/// negative log probability of the target at the last context position.
class Transformer {
 public:
  explicit Transformer(ModelConfig config);

  const ModelConfig& config() const { return config_; }
  std::size_t param_count() const { return param_count_; }
  std::shared_ptr<const std::vector<Segment>> segment_table() const { return segments_; }

  /// Scaled-normal init, rounded through float32 so checkpoints round-trip
  /// bit-exactly. Each segment draws from its own derived stream.
  ParamVector init_params(std::uint64_t seed) const;

  LossRecord forward_per_token_loss(const ParamVector& params, std::span<const Sample> batch) const;
  double sample_loss(const ParamVector& params, const Sample& sample) const;

  /// Analytic gradient of the batch-mean loss. `threads` > 1 splits the batch
  /// into contiguous chunks reduced in fixed order (deterministic).
  ParamVector grad_loss(const ParamVector& params, std::span<const Sample> batch,
                        int threads = 1) const;

  ComponentSpec head_component(int layer, int head) const;
  std::vector<ComponentSpec> all_head_components() const;  // layer-major order
  std::vector<std::string> component_names() const;

  struct Offsets;  // parameter layout, defined in model.cpp

 private:
  void backward_sample(const ParamVector& params, const Sample& sample, double weight,
                       double* grad) const;

  ModelConfig config_;
  std::shared_ptr<const std::vector<Segment>> segments_;
  std::size_t param_count_ = 0;
  std::shared_ptr<const Offsets> offsets_;
};

}  // namespace atlas
