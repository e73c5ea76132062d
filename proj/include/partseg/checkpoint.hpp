#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "partseg/localhdp.hpp"

namespace partseg {

// Checkpoint layout: a text manifest (vocabulary, hyperparameters, one
// "part" line per model with its counters) terminated by "end", followed by
// the raw model arrays as little-endian IEEE-754 doubles. For each part, in
// manifest order: lambda (row-major, topics x vocabulary), then u, then v.

void write_checkpoint(std::ostream& out, const PartRegistry& registry);
PartRegistry read_checkpoint(std::istream& in, const std::string& source = "<stream>");

void save_checkpoint(const std::filesystem::path& path, const PartRegistry& registry);
PartRegistry load_checkpoint(const std::filesystem::path& path);

}  // namespace partseg
