#include "ensemblecast/tensor.hpp"

#include <cstring>
#include <fstream>

#include "ensemblecast/errors.hpp"

namespace ecast {

Tensor& TensorStore::add(std::string name, std::vector<int> dims) {
  if (name.empty() || name.size() > 31)
    fail(Errc::invalid_argument, "tensor name must be 1..31 bytes: '" + name + "'");
  if (find(name)) fail(Errc::invalid_argument, "duplicate tensor name: " + name);
  std::size_t n = 1;
  for (int d : dims) {
    if (d < 1) fail(Errc::invalid_argument, "tensor dims must be positive");
    n *= static_cast<std::size_t>(d);
  }
  Tensor t;
  t.name = std::move(name);
  t.dims = std::move(dims);
  t.v.assign(n, 0.0);
  tensors_.push_back(std::move(t));
  return tensors_.back();
}

Tensor* TensorStore::find(std::string_view name) noexcept {
  for (Tensor& t : tensors_)
    if (t.name == name) return &t;
  return nullptr;
}

const Tensor* TensorStore::find(std::string_view name) const noexcept {
  for (const Tensor& t : tensors_)
    if (t.name == name) return &t;
  return nullptr;
}

const Tensor& TensorStore::at(std::string_view name) const {
  const Tensor* t = find(name);
  if (!t) fail(Errc::invalid_argument, "missing tensor: " + std::string(name));
  return *t;
}

std::size_t TensorStore::total_size() const noexcept {
  std::size_t n = 0;
  for (const Tensor& t : tensors_) n += t.size();
  return n;
}

void TensorStore::flatten(std::vector<double>& out) const {
  out.clear();
  out.reserve(total_size());
  for (const Tensor& t : tensors_) out.insert(out.end(), t.v.begin(), t.v.end());
}

void TensorStore::unflatten(const std::vector<double>& flat) {
  if (flat.size() != total_size())
    fail(Errc::shape_mismatch, "flat parameter vector size does not match the store");
  std::size_t off = 0;
  for (Tensor& t : tensors_) {
    std::copy(flat.begin() + static_cast<std::ptrdiff_t>(off),
              flat.begin() + static_cast<std::ptrdiff_t>(off + t.size()), t.v.begin());
    off += t.size();
  }
}

void save_omp1(const TensorStore& store, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::invalid_argument, "cannot open for writing: " + path.string());
  out.write("OMP1", 4);
  const std::uint32_t n = static_cast<std::uint32_t>(store.tensors().size());
  out.write(reinterpret_cast<const char*>(&n), 4);
  for (const Tensor& t : store.tensors()) {
    char padded[32] = {};
    std::memcpy(padded, t.name.data(), t.name.size());
    out.write(padded, 32);
    const std::uint32_t rank = static_cast<std::uint32_t>(t.dims.size());
    out.write(reinterpret_cast<const char*>(&rank), 4);
    for (int d : t.dims) {
      const std::uint32_t u = static_cast<std::uint32_t>(d);
      out.write(reinterpret_cast<const char*>(&u), 4);
    }
    for (double v : t.v) {
      const float f = static_cast<float>(v);
      out.write(reinterpret_cast<const char*>(&f), 4);
    }
  }
  if (!out) fail(Errc::invalid_argument, "write failed: " + path.string());
}

TensorStore load_omp1(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::truncated_file, "cannot open: " + path.string());
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t off = 0;
  auto need = [&](std::size_t n) {
    if (off + n > raw.size()) fail(Errc::truncated_file, "model file ends mid-record");
  };
  need(8);
  if (std::memcmp(raw.data(), "OMP1", 4) != 0)
    fail(Errc::bad_magic, "not an OMP1 file: " + path.string());
  std::uint32_t n_tensors;
  std::memcpy(&n_tensors, raw.data() + 4, 4);
  off = 8;

  TensorStore store;
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    need(36);
    char padded[32];
    std::memcpy(padded, raw.data() + off, 32);
    padded[31] = '\0';
    std::uint32_t rank;
    std::memcpy(&rank, raw.data() + off + 32, 4);
    off += 36;
    if (rank > 8) fail(Errc::shape_mismatch, "tensor rank too large");
    std::vector<int> dims(rank);
    need(4 * rank);
    for (std::uint32_t r = 0; r < rank; ++r) {
      std::uint32_t d;
      std::memcpy(&d, raw.data() + off + 4 * r, 4);
      dims[r] = static_cast<int>(d);
    }
    off += 4 * rank;
    Tensor& t = store.add(padded, dims);
    need(4 * t.size());
    for (std::size_t k = 0; k < t.size(); ++k) {
      float f;
      std::memcpy(&f, raw.data() + off + 4 * k, 4);
      t.v[k] = f;
    }
    off += 4 * t.size();
  }
  if (off != raw.size()) fail(Errc::truncated_file, "trailing bytes after tensor blocks");
  return store;
}

}  // namespace ecast
