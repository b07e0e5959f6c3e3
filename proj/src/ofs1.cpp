#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "ensemblecast/grid.hpp"

namespace ecast {
namespace {

constexpr std::uint32_t kLandNanBits = 0x7FC00000u;

struct Writer {
  std::vector<unsigned char> buf;
  void bytes(const void* p, std::size_t n) {
    const auto* q = static_cast<const unsigned char*>(p);
    buf.insert(buf.end(), q, q + n);
  }
  template <class T>
  void put(T v) {
    bytes(&v, sizeof v);
  }
};

struct Cursor {
  const unsigned char* p;
  std::size_t left;
  void bytes(void* out, std::size_t n) {
    if (n > left) fail(Errc::truncated_file, "file ends mid-record");
    std::memcpy(out, p, n);
    p += n;
    left -= n;
  }
  template <class T>
  T get() {
    T v;
    bytes(&v, sizeof v);
    return v;
  }
};

bool is_bathymetry_name(std::string_view name) { return name == "bathymetry"; }

}  // namespace

int Ofs1Stack::var_index(std::string_view name) const noexcept {
  for (std::size_t k = 0; k < var_names.size(); ++k)
    if (var_names[k] == name) return static_cast<int>(k);
  return -1;
}

void save_ofs1(const Ofs1Stack& stack, const std::filesystem::path& path) {
  const GridSpec& g = *stack.grid;
  g.validate();
  if (stack.var_names.empty()) fail(Errc::invalid_argument, "stack has no variables");
  for (const std::string& name : stack.var_names)
    if (name.empty() || name.size() > 31)
      fail(Errc::invalid_argument, "variable name must be 1..31 bytes: '" + name + "'");
  if (stack.frame() == 0 || stack.data.size() % stack.frame() != 0)
    fail(Errc::invalid_argument, "payload size is not a whole number of frames");

  Writer w;
  w.bytes("OFS1", 4);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(stack.n_time()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(g.n_lat()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(g.n_lon()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(stack.var_names.size()));
  w.put<std::int64_t>(stack.epoch_day);
  for (double v : g.lats) w.put(v);
  for (double v : g.lons) w.put(v);
  w.bytes(g.sea_mask.data(), g.sea_mask.size());
  for (const std::string& name : stack.var_names) {
    char padded[32] = {};
    std::memcpy(padded, name.data(), name.size());
    w.bytes(padded, 32);
  }
  for (int t = 0; t < stack.n_time(); ++t) {
    for (std::size_t v = 0; v < stack.var_names.size(); ++v) {
      const bool bathy = is_bathymetry_name(stack.var_names[v]);
      const float* frame = stack.frame_at(t, static_cast<int>(v));
      for (std::size_t c = 0; c < g.n_cells(); ++c) {
        if (g.is_sea(c)) {
          w.put(frame[c]);
        } else if (bathy) {
          w.put(0.0f);
        } else {
          w.put<std::uint32_t>(kLandNanBits);
        }
      }
    }
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::invalid_argument, "cannot open for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(w.buf.data()),
            static_cast<std::streamsize>(w.buf.size()));
  if (!out) fail(Errc::invalid_argument, "write failed: " + path.string());
}

Ofs1Stack load_ofs1(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::truncated_file, "cannot open: " + path.string());
  std::vector<unsigned char> raw((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
  Cursor cur{raw.data(), raw.size()};

  char magic[4];
  cur.bytes(magic, 4);
  if (std::memcmp(magic, "OFS1", 4) != 0)
    fail(Errc::bad_magic, "not an OFS1 file: " + path.string());

  const auto n_time = cur.get<std::uint32_t>();
  const auto n_lat = cur.get<std::uint32_t>();
  const auto n_lon = cur.get<std::uint32_t>();
  const auto n_var = cur.get<std::uint32_t>();
  const auto epoch_day = cur.get<std::int64_t>();
  if (n_lat == 0 || n_lon == 0 || n_var == 0) fail(Errc::invalid_grid, "zero-sized dimension");

  GridSpec g;
  g.lats.resize(n_lat);
  g.lons.resize(n_lon);
  cur.bytes(g.lats.data(), n_lat * sizeof(double));
  cur.bytes(g.lons.data(), n_lon * sizeof(double));
  g.sea_mask.resize(static_cast<std::size_t>(n_lat) * n_lon);
  cur.bytes(g.sea_mask.data(), g.sea_mask.size());
  g.validate();
  if (g.n_sea() == 0) fail(Errc::mask_mismatch, "grid has no sea cells");

  Ofs1Stack stack;
  stack.grid = std::make_shared<GridSpec>(std::move(g));
  stack.epoch_day = epoch_day;
  stack.var_names.resize(n_var);
  for (auto& name : stack.var_names) {
    char padded[32];
    cur.bytes(padded, 32);
    padded[31] = '\0';
    name = padded;
  }

  const std::size_t n_vals =
      static_cast<std::size_t>(n_time) * n_var * stack.grid->n_cells();
  stack.data.resize(n_vals);
  cur.bytes(stack.data.data(), n_vals * sizeof(float));
  if (cur.left != 0) fail(Errc::truncated_file, "trailing bytes after payload");

  const GridSpec& grid = *stack.grid;
  for (std::uint32_t t = 0; t < n_time; ++t) {
    for (std::uint32_t v = 0; v < n_var; ++v) {
      const bool bathy = is_bathymetry_name(stack.var_names[v]);
      const float* frame = stack.frame_at(static_cast<int>(t), static_cast<int>(v));
      for (std::size_t c = 0; c < grid.n_cells(); ++c) {
        if (grid.is_sea(c)) continue;
        if (bathy) {
          if (frame[c] != 0.0f)
            fail(Errc::mask_mismatch, "bathymetry land cell is not zero");
        } else if (!std::isnan(frame[c])) {
          fail(Errc::mask_mismatch,
               "finite value on land in variable " + stack.var_names[v]);
        }
      }
    }
  }
  return stack;
}

TimeSeries series_from_stack(const Ofs1Stack& stack) {
  TimeSeries s;
  s.grid = stack.grid;
  s.epoch_day = stack.epoch_day;
  s.vars.reserve(stack.var_names.size());
  for (const std::string& name : stack.var_names) {
    const auto v = var_from_name(name);
    if (!v) fail(Errc::unknown_variable, "not a physical variable: " + name);
    s.vars.push_back(*v);
  }
  s.data = stack.data;
  const GridSpec& g = *s.grid;
  for (int t = 0; t < s.n_time(); ++t) {
    for (std::size_t k = 0; k < s.vars.size(); ++k) {
      const float* frame = s.frame_at(t, static_cast<int>(k));
      for (std::size_t c = 0; c < g.n_cells(); ++c)
        if (g.is_sea(c) && !std::isfinite(frame[c]))
          fail(Errc::mask_mismatch,
               std::string("non-finite sea value in ") + var_name(s.vars[k]));
    }
  }
  return s;
}

Ofs1Stack stack_from_series(const TimeSeries& series) {
  Ofs1Stack stack;
  stack.grid = series.grid;
  stack.epoch_day = series.epoch_day;
  for (Var v : series.vars) stack.var_names.emplace_back(var_name(v));
  stack.data = series.data;
  return stack;
}

void save_series(const TimeSeries& series, const std::filesystem::path& path) {
  save_ofs1(stack_from_series(series), path);
}

TimeSeries load_series(const std::filesystem::path& path) {
  return series_from_stack(load_ofs1(path));
}

}  // namespace ecast
