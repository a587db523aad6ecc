#pragma once

// Versioned JSON checkpoints: config, family, seed, every parameter block
// in row-major order, and the data normalisation.

#include <cstdint>
#include <string>

#include "dwpkit/dataset.hpp"
#include "dwpkit/vi.hpp"

namespace dwpkit::io {

inline constexpr int kCheckpointSchema = 1;

struct Checkpoint {
  vi::Family family = vi::Family::ABGW;
  std::uint64_t seed = 0;
  model::DWPConfig config;
  vi::ModelParams params;
  data::Normalisation norm;
};

std::string to_json(const Checkpoint& c);
Checkpoint from_json(const std::string& text);

void save_checkpoint(const Checkpoint& c, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace dwpkit::io
