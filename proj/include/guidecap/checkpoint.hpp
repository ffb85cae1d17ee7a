#pragma once

#include <string>
#include <utility>
#include <vector>

#include "guidecap/graph.hpp"

namespace guidecap::numeric {

// Checkpoint = <prefix>.json manifest (tensor names, shapes, dtype, byte
// offsets) + <prefix>.bin blob of little-endian float32, row-major, in
// manifest order. Values are converted double -> f32 on save and back on
// load; the file-level round trip load(save(x)) -> save is byte-exact.
void save_checkpoint(const std::string& prefix, const std::vector<const Param*>& tensors);

std::vector<std::pair<std::string, Array>> load_checkpoint(const std::string& prefix);

// Loads by name into an existing parameter list; every param must be present
// in the file with a matching shape, and the file must not hold extras.
void load_checkpoint_into(const std::string& prefix, const std::vector<Param*>& params);

}  // namespace guidecap::numeric
