#pragma once

// Flat binary parameter container:
//   "TSPK" | version u32 | entries until EOF
//   entry = name_len u32 | name bytes (UTF-8) | rank u32 | extents u32[rank] | f64[numel]
// All integers and floats little-endian.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tspkit/tensor.hpp"

namespace tspkit {

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

inline constexpr std::uint32_t kTensorFileVersion = 1;

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void write_tensors(std::ostream& out, const NamedTensors& tensors);
NamedTensors read_tensors(std::istream& in);

void save_tensors(const std::filesystem::path& path, const NamedTensors& tensors);
NamedTensors load_tensors(const std::filesystem::path& path);

// Copies values from `source` into same-named tensors of `target`. Every
// target name must be present with an identical shape.
void assign_tensors(const NamedTensors& target, const NamedTensors& source);

}  // namespace tspkit
