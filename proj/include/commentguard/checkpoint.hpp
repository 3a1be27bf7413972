#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "commentguard/cnav.hpp"

namespace commentguard::cnav {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Model plus the free-form metadata stored next to it (encoder settings).
struct Checkpoint {
  CnavModel<double> model;
  std::string metadata;  // JSON text, may be empty
};

/// Layout (little-endian): "CNAV", u32 version, u32 d, u32 M, u32 heads,
/// u32 hidden-layer count, u32 widths..., u32 metadata length, metadata
/// bytes, u64 parameter count, then float32 parameters in declaration order
/// (row-major per array).
void write_checkpoint(const CnavModel<double>& model, std::ostream& out, const std::string& metadata = {});
void save_checkpoint(const CnavModel<double>& model, const std::filesystem::path& path,
                     const std::string& metadata = {});

Checkpoint read_checkpoint(std::istream& in);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Rounds every parameter through float32, matching what a checkpoint holds.
CnavModel<double> round_to_float(const CnavModel<double>& model);

}  // namespace commentguard::cnav
