#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "retts/model.hpp"

namespace retts {

struct GradcheckReport {
  std::string name;
  double max_relative_error = 0.0;
  std::size_t checked = 0;  // scalars probed
};

/// d_model 8, 4 tokens, two encoder and decoder blocks, one global-encoder
/// module, every other extent small.
ModelConfig gradcheck_toy_config();

/// Finite-difference checks of every layer and of the end-to-end training
/// loss on a 3-phoneme, 6-frame utterance, built from `config`'s extents
/// with parameters and inputs drawn from `seed`.
std::vector<GradcheckReport> run_gradcheck_suite(const ModelConfig& config, std::uint64_t seed,
                                                 double eps = 1e-5);

}  // namespace retts
