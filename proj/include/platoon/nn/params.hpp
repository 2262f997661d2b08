#pragma once

#include <string>
#include <vector>

#include "platoon/nn/kernels.hpp"
#include "platoon/rng.hpp"

namespace platoon::nn {

/// Ordered, named parameter tensors. Copying a store deep-copies its values,
/// which is how target networks are made and refreshed.
class ParameterStore {
 public:
  int add(std::string name, Mat value);
  int index(const std::string& name) const;  // throws if missing
  int size() const { return static_cast<int>(values_.size()); }

  const std::string& name(int i) const { return names_[i]; }
  const Mat& value(int i) const { return values_[i]; }
  Mat& value(int i) { return values_[i]; }

  std::size_t scalar_count() const;
  std::vector<Mat> zeros_like() const;
  bool same_layout(const ParameterStore& other) const;
  bool operator==(const ParameterStore& other) const;

 private:
  std::vector<std::string> names_;
  std::vector<Mat> values_;
};

/// U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
Mat uniform_init(Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in, Rng& rng);

/// Sum of squares over a gradient set, square-rooted.
double global_norm(const std::vector<Mat>& grads);

struct RmsPropConfig {
  double lr = 5e-4;
  double alpha = 0.99;
  double eps = 1e-5;
  double clip_norm = 10.0;  // <= 0 disables clipping
};

class RmsProp {
 public:
  RmsProp() = default;
  RmsProp(const ParameterStore& store, RmsPropConfig cfg);

  /// Clips `grads` in place to the configured global norm, then updates.
  /// Returns the pre-clip norm. Throws on a non-finite gradient.
  double step(ParameterStore& store, std::vector<Mat>& grads);

  const RmsPropConfig& config() const { return cfg_; }
  const std::vector<Mat>& square_avg() const { return sq_; }
  std::vector<Mat>& square_avg() { return sq_; }

 private:
  RmsPropConfig cfg_;
  std::vector<Mat> sq_;
};

/// Binary checkpoint: magic, format version, a JSON header string, then named
/// tensors (rows, cols, raw little-endian doubles). Round-trips bit-exactly.
inline constexpr char kCheckpointMagic[8] = {'P', 'L', 'T', 'N', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::string header_json = "{}";
  ParameterStore params;
  std::vector<ParameterStore> extra;  // e.g. target and optimizer state
};

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace platoon::nn
