#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace flexmatch {

struct InvalidParams : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ProbabilityOverflow : InvalidParams {
  using InvalidParams::InvalidParams;
};

struct NonConvergence : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Variant { base, local, spatial, imbalanced, weighted };

inline const char* to_string(Variant v) {
  switch (v) {
    case Variant::base: return "base";
    case Variant::local: return "local";
    case Variant::spatial: return "spatial";
    case Variant::imbalanced: return "imbalanced";
    case Variant::weighted: return "weighted";
  }
  return "?";
}

inline Variant parse_variant(const std::string& s) {
  if (s == "base") return Variant::base;
  if (s == "local") return Variant::local;
  if (s == "spatial") return Variant::spatial;
  if (s == "imbalanced") return Variant::imbalanced;
  if (s == "weighted") return Variant::weighted;
  throw InvalidParams("unknown variant: " + s);
}

struct ModelParams {
  double alpha = 0.0;
  double alpha_f = 1.0;
  int n = 100;
  int k = 2;
  double lambda = 1.0;
};

struct FlexAllocation {
  double b_l = 0.0;
  double b_r = 0.0;
  double B() const { return b_l + b_r; }
};

inline void check_alloc(const FlexAllocation& a) {
  if (!(a.b_l >= 0.0 && a.b_l <= 1.0 && a.b_r >= 0.0 && a.b_r <= 1.0))
    throw InvalidParams("allocation must lie in [0,1]^2");
}

// round(lambda*n) with ties to even
inline int right_side_size(const ModelParams& p) {
  double x = p.lambda * p.n;
  double r = std::nearbyint(x);
  if (std::fabs(x - std::trunc(x)) == 0.5) r = 2.0 * std::round(x / 2.0);
  return static_cast<int>(r);
}

}  // namespace flexmatch
