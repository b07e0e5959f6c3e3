#pragma once

#include <stdexcept>
#include <string>

namespace ecast {

// Failure categories surfaced by the toolkit. Tests match on these rather
// than on message text.
enum class Errc {
  // file format / grid model
  bad_magic,
  truncated_file,
  non_monotone_axis,
  mask_mismatch,
  degenerate_variance,
  empty_overlap,
  cadence_mismatch,
  invalid_grid,
  invalid_split,
  unknown_variable,
  // noise generation
  negative_sigma,
  resolution_mismatch,
  bad_octaves,
  grid_mismatch,
  // mesh construction
  bad_level_spec,
  // stepper / training
  shape_mismatch,
  insufficient_forcing,
  horizon_mismatch,
  diverged_loss,
  // verification
  single_member,
  lead_out_of_range,
  lead_mismatch,
  // configuration
  parse_error,
  unknown_key,
  missing_section,
  invalid_argument,
};

const char* errc_name(Errc c) noexcept;

class Error : public std::runtime_error {
public:
  Error(Errc code, const std::string& msg)
      : std::runtime_error(std::string(errc_name(code)) + ": " + msg), code_(code) {}

  Errc code() const noexcept { return code_; }

private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& msg) { throw Error(code, msg); }

}  // namespace ecast
