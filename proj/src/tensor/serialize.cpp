#include "tspkit/serialize.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>

namespace tspkit {

namespace {

constexpr char kMagic[4] = {'T', 'S', 'P', 'K'};

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_f64(std::ostream& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

void read_exact(std::istream& in, unsigned char* dst, std::size_t n, const char* what) {
  in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) {
    throw FormatError(std::string("truncated tensor file while reading ") + what);
  }
}

std::uint32_t get_u32(std::istream& in, const char* what) {
  unsigned char b[4];
  read_exact(in, b, 4, what);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

double get_f64(std::istream& in) {
  unsigned char b[8];
  read_exact(in, b, 8, "payload");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace

void write_tensors(std::ostream& out, const NamedTensors& tensors) {
  out.write(kMagic, 4);
  put_u32(out, kTensorFileVersion);
  for (const auto& [name, t] : tensors) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t e : t.shape()) put_u32(out, static_cast<std::uint32_t>(e));
    for (double v : t.data()) put_f64(out, v);
  }
}

NamedTensors read_tensors(std::istream& in) {
  unsigned char magic[4];
  read_exact(in, magic, 4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError("not a TSPK tensor file");
  const std::uint32_t version = get_u32(in, "version");
  if (version != kTensorFileVersion) {
    throw FormatError("unsupported TSPK version " + std::to_string(version));
  }
  NamedTensors result;
  while (in.peek() != std::char_traits<char>::eof()) {
    const std::uint32_t name_len = get_u32(in, "name length");
    std::string name(name_len, '\0');
    read_exact(in, reinterpret_cast<unsigned char*>(name.data()), name_len, "name");
    const std::uint32_t rank = get_u32(in, "rank");
    if (rank == 0 || rank > 8) throw FormatError("tensor '" + name + "' has invalid rank");
    Shape shape(rank);
    for (auto& e : shape) e = get_u32(in, "extent");
    std::vector<double> values(shape_numel(shape));
    for (double& v : values) v = get_f64(in);
    result.emplace_back(std::move(name), Tensor::from(std::move(shape), std::move(values)));
  }
  return result;
}

void save_tensors(const std::filesystem::path& path, const NamedTensors& tensors) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_tensors(out, tensors);
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

NamedTensors load_tensors(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_tensors(in);
}

void assign_tensors(const NamedTensors& target, const NamedTensors& source) {
  std::map<std::string, const Tensor*> by_name;
  for (const auto& [name, t] : source) by_name[name] = &t;
  for (const auto& [name, t] : target) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw FormatError("missing tensor '" + name + "'");
    if (it->second->shape() != t.shape()) {
      throw FormatError("tensor '" + name + "' has shape " +
                        shape_to_string(it->second->shape()) + ", expected " +
                        shape_to_string(t.shape()));
    }
    Tensor dst = t;
    auto src = it->second->data();
    std::copy(src.begin(), src.end(), dst.mutable_data().begin());
  }
}

}  // namespace tspkit
