#pragma once
// Serialization boundary: SHA-256 content hashes, deterministic CSV and JSON
// writers, unit-tagged configuration scalars, state/schedule round-trips,
// and the result-bundle manifest shared by every scenario runner.

#include "tpqr/hilbert.hpp"
#include "tpqr/waveguide.hpp"

#include <json.hpp>

#include <cstddef>
#include <string>
#include <vector>

namespace tpqr::io {

using json = nlohmann::json;

// Lowercase hex SHA-256 of the byte string.
std::string sha256_hex(const std::string& bytes);

// Shortest fixed formatting that round-trips doubles (%.17g).
std::string format_double(double x);

// CSV with a header row; every cell rendered by format_double. Rows must all
// match the header width.
std::string render_csv(const std::vector<std::string>& header,
                       const std::vector<std::vector<double>>& rows);

void write_text_file(const std::string& path, const std::string& bytes);
std::string read_text_file(const std::string& path);

// Configuration scalar in internal units (rad/ns, 1/ns, ns). Accepts a bare
// number (already internal) or {"value": x, "unit": u} with u one of
// GHz_over_2pi, MHz_over_2pi, rad_per_ns, per_us, per_ns, ns, dimensionless.
double parse_quantity(const json& node);

// {"basis_labels": [...], "re": [...], "im": [...]}; density matrices are
// row-major.
json state_to_json(const KetState& state);
json density_to_json(const DensityMatrix& rho);

// Schedule round-trip: {"g0", "t_in", "t_q", "t_end", "calib_delta_omega",
// "segments": [{"type": zero|constant|exp_decay|linear_ramp,
//               "t_start", "t_end", "a", "b"}]}.
json schedule_to_json(const CouplerSchedule& schedule);
CouplerSchedule schedule_from_json(const json& j);

struct FileRecord {
    std::string name;
    std::string sha256;
    std::size_t bytes = 0;
};

// One scenario run: resolved parameters, headline metrics, and the emitted
// files (each hashed). The manifest written last lists all of them.
struct ResultBundle {
    std::string scenario;
    json params = json::object();
    json summary = json::object();
    std::vector<FileRecord> files;
    double wall_time_s = 0.0;
};

// Write `content` as dir/name and record it (hash + size) in the bundle.
// A no-op returning an empty record when dir is empty.
FileRecord emit_file(ResultBundle& bundle, const std::string& dir,
                     const std::string& name, const std::string& content);
FileRecord emit_json(ResultBundle& bundle, const std::string& dir,
                     const std::string& name, const json& j);

// Writes summary.json (recorded as a data file) and then manifest.json with
// scenario, params, versions, wall time, and the full hashed file list.
// Returns the manifest. No-op (still returning the manifest) when dir empty.
json finalize_bundle(ResultBundle& bundle, const std::string& dir);

}  // namespace tpqr::io
