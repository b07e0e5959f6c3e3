#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace ecast {

struct Tensor {
  std::string name;
  std::vector<int> dims;
  std::vector<double> v;

  std::size_t size() const noexcept { return v.size(); }
};

/// Ordered collection of named tensors; the concatenation of all tensor
/// payloads in insertion order is the flat parameter vector used by the
/// optimizer and the finite-difference checks.
class TensorStore {
 public:
  Tensor& add(std::string name, std::vector<int> dims);
  Tensor* find(std::string_view name) noexcept;
  const Tensor* find(std::string_view name) const noexcept;
  const Tensor& at(std::string_view name) const;

  std::vector<Tensor>& tensors() noexcept { return tensors_; }
  const std::vector<Tensor>& tensors() const noexcept { return tensors_; }

  std::size_t total_size() const noexcept;
  void flatten(std::vector<double>& out) const;
  void unflatten(const std::vector<double>& flat);

 private:
  std::vector<Tensor> tensors_;
};

// OMP1 model container, little-endian: "OMP1"; u32 n_tensors; per tensor a
// 32-byte NUL-padded name, u32 rank, u32 dims[rank], f32 payload.
void save_omp1(const TensorStore& store, const std::filesystem::path& path);
TensorStore load_omp1(const std::filesystem::path& path);

}  // namespace ecast
