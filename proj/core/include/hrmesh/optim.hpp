#pragma once

#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "hrmesh/tensor.hpp"

namespace hrmesh::ad {

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double grad_clip_norm = 0.5;  // <= 0 disables clipping
};

struct AdamReport {
  double grad_norm = 0.0;  // before clipping
  double clip_scale = 1.0;
};

// Named parameters with Adam moments. Parameters belong to a group so whole
// groups can be frozen bitwise during an update.
class ParamStore {
 public:
  struct Entry {
    std::string name;
    std::string group;
    Tensor param;
    std::vector<double> m;
    std::vector<double> v;
    std::int64_t steps = 0;
  };

  Tensor add(const std::string& name, int rows, int cols, std::vector<double> init, const std::string& group);
  Tensor get(const std::string& name) const;
  bool contains(const std::string& name) const;

  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t num_scalars(const std::string& group = "") const;
  std::int64_t step() const { return step_; }
  void set_step(std::int64_t s) { step_ = s; }

  void zero_grad();
  // Global L2 norm of gradients over groups not in `frozen`.
  double grad_norm(const std::set<std::string>& frozen = {}) const;
  // Clip-then-Adam over groups not in `frozen`. Throws NonFinite without
  // touching any parameter when a gradient is NaN or infinite.
  AdamReport adam_step(const AdamConfig& config, const std::set<std::string>& frozen = {});

  // Flat copy of parameter values in entry order, for comparisons and snapshots.
  std::vector<double> flatten(const std::string& group = "") const;

 private:
  std::vector<Entry> entries_;
  std::int64_t step_ = 0;
};

// Glorot-uniform initial values.
std::vector<double> glorot_uniform(int fan_in, int fan_out, std::mt19937_64& rng, double gain = 1.0);

// JSON checkpoint: {"header": ..., "params": {name: {shape, group, data}}, "optimizer": {...}}.
// header_json must be a serialized JSON value.
void save_checkpoint(const std::string& path, const ParamStore& store, const std::string& header_json);
// Restores parameters and moments by name into a store with the same layout; returns the header.
std::string load_checkpoint(const std::string& path, ParamStore& store);
// Header only, for building a store with the right layout before loading.
std::string read_checkpoint_header(const std::string& path);

}  // namespace hrmesh::ad
