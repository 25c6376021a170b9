#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "liouvlab/liouville.hpp"
#include "liouvlab/trajectory.hpp"

namespace liouvlab::io {

using json = nlohmann::ordered_json;

/// printf("%.17g"); round-trips every finite double.
std::string format_double(double x);

/// {"model_hash": "0x...", "coeffs": [re0, im0, re1, im1, ...]}
json field_to_json(const Field& u);
Field field_from_json(const json& j, const ModelPtr& model);

/// Little-endian record: u64 model_hash, u64 M, then 2M float64 (re, im).
void write_field_binary(std::ostream& out, const Field& u);
Field read_field_binary(std::istream& in, const ModelPtr& model);

json model_to_json(const SpectralModel& model);
ModelPtr model_from_json(const json& j);

/// Directory with manifest.json (model, label, seed, count), samples.bin
/// (concatenated field records) and weights.csv (index,weight).
void write_ensemble(const std::filesystem::path& dir, const Ensemble& e);
Ensemble read_ensemble(const std::filesystem::path& dir);

/// Columns t, re_0, im_0, ..., then the logged invariants.
void write_trajectory_csv(std::ostream& out, const Trajectory& traj);
/// Columns t, x_0, ..., x_{n-1} (named by `labels` if given), then invariants.
void write_trajectory_csv(std::ostream& out, const OdeTrajectory& traj, const std::vector<std::string>& labels = {});

json residual_to_json(const ResidualRecord& r);

/// Flat CSV of JSON records: header is the union of keys in first-seen
/// order, numbers at 17 significant digits, strings quoted when needed.
std::string records_to_csv(const std::vector<json>& records);

/// Git blob hash: SHA-1 of "blob <size>\0" followed by the bytes.
std::string git_blob_sha1(std::string_view bytes);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view text);

}  // namespace liouvlab::io
