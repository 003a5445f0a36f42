#include "tpqr/io.hpp"

#include "tpqr/units.hpp"

#include <openssl/evp.h>

#include <Eigen/Core>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace tpqr::io {

std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (ctx == nullptr || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) != 1 ||
        EVP_DigestFinal_ex(ctx, digest, &len) != 1) {
        EVP_MD_CTX_free(ctx);
        throw std::runtime_error("sha256_hex: digest computation failed");
    }
    EVP_MD_CTX_free(ctx);
    std::string hex(2 * len, '0');
    static const char* digits = "0123456789abcdef";
    for (unsigned int i = 0; i < len; ++i) {
        hex[2 * i] = digits[digest[i] >> 4];
        hex[2 * i + 1] = digits[digest[i] & 0xf];
    }
    return hex;
}

std::string format_double(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string render_csv(const std::vector<std::string>& header,
                       const std::vector<std::vector<double>>& rows) {
    if (header.empty()) throw std::invalid_argument("render_csv: empty header");
    std::ostringstream out;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i > 0) out << ',';
        out << header[i];
    }
    out << '\n';
    for (const auto& row : rows) {
        if (row.size() != header.size())
            throw std::invalid_argument("render_csv: row width does not match header");
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i > 0) out << ',';
            out << format_double(row[i]);
        }
        out << '\n';
    }
    return out.str();
}

void write_text_file(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("write_text_file: cannot open " + path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write_text_file: short write to " + path);
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_text_file: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

double parse_quantity(const json& node) {
    if (node.is_number()) return node.get<double>();
    if (!node.is_object() || !node.contains("value") || !node.contains("unit"))
        throw std::invalid_argument(
            "parse_quantity: expected a number or {\"value\", \"unit\"}");
    const double value = node.at("value").get<double>();
    const std::string unit = node.at("unit").get<std::string>();
    if (unit == "GHz_over_2pi") return units::ghz_cyclic(value);
    if (unit == "MHz_over_2pi") return units::mhz_cyclic(value);
    if (unit == "rad_per_ns") return value;
    if (unit == "per_us") return units::per_us(value);
    if (unit == "per_ns") return value;
    if (unit == "ns") return value;
    if (unit == "dimensionless") return value;
    throw std::invalid_argument("parse_quantity: unknown unit \"" + unit + "\"");
}

json state_to_json(const KetState& state) {
    json labels = json::array();
    json re = json::array(), im = json::array();
    for (int i = 0; i < state.space.dim(); ++i) {
        labels.push_back(state.space.basis_label(i));
        re.push_back(state.amplitudes(i).real());
        im.push_back(state.amplitudes(i).imag());
    }
    return {{"basis_labels", labels}, {"re", re}, {"im", im}};
}

json density_to_json(const DensityMatrix& rho) {
    const int d = rho.space.dim();
    json labels = json::array();
    json re = json::array(), im = json::array();
    for (int i = 0; i < d; ++i) labels.push_back(rho.space.basis_label(i));
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            re.push_back(rho.matrix(i, j).real());
            im.push_back(rho.matrix(i, j).imag());
        }
    return {{"basis_labels", labels}, {"re", re}, {"im", im}};
}

namespace {

const char* kind_name(ScheduleSegment::Kind kind) {
    switch (kind) {
        case ScheduleSegment::Kind::Zero:
            return "zero";
        case ScheduleSegment::Kind::Constant:
            return "constant";
        case ScheduleSegment::Kind::ExpDecay:
            return "exp_decay";
        case ScheduleSegment::Kind::LinearRamp:
            return "linear_ramp";
    }
    return "zero";
}

ScheduleSegment::Kind kind_from_name(const std::string& name) {
    if (name == "zero") return ScheduleSegment::Kind::Zero;
    if (name == "constant") return ScheduleSegment::Kind::Constant;
    if (name == "exp_decay") return ScheduleSegment::Kind::ExpDecay;
    if (name == "linear_ramp") return ScheduleSegment::Kind::LinearRamp;
    throw std::invalid_argument("schedule_from_json: unknown segment type \"" + name +
                                "\"");
}

}  // namespace

json schedule_to_json(const CouplerSchedule& schedule) {
    json segments = json::array();
    for (const auto& seg : schedule.wr_segments)
        segments.push_back({{"type", kind_name(seg.kind)},
                            {"t_start", seg.t_start},
                            {"t_end", seg.t_end},
                            {"a", seg.a},
                            {"b", seg.b}});
    return {{"g0", schedule.g0},
            {"t_in", schedule.t_in},
            {"t_q", schedule.t_q},
            {"t_end", schedule.t_end},
            {"calib_delta_omega", schedule.calib_delta_omega},
            {"segments", segments}};
}

CouplerSchedule schedule_from_json(const json& j) {
    CouplerSchedule s;
    s.g0 = j.at("g0").get<double>();
    s.t_in = j.at("t_in").get<double>();
    s.t_q = j.at("t_q").get<double>();
    s.t_end = j.at("t_end").get<double>();
    s.calib_delta_omega = j.at("calib_delta_omega").get<double>();
    for (const auto& seg : j.at("segments"))
        s.wr_segments.push_back({kind_from_name(seg.at("type").get<std::string>()),
                                 seg.at("t_start").get<double>(),
                                 seg.at("t_end").get<double>(), seg.at("a").get<double>(),
                                 seg.at("b").get<double>()});
    s.validate();
    return s;
}

FileRecord emit_file(ResultBundle& bundle, const std::string& dir,
                     const std::string& name, const std::string& content) {
    if (dir.empty()) return {};
    std::filesystem::create_directories(dir);
    const std::string path = dir + "/" + name;
    write_text_file(path, content);
    FileRecord record{name, sha256_hex(content), content.size()};
    bundle.files.push_back(record);
    return record;
}

FileRecord emit_json(ResultBundle& bundle, const std::string& dir,
                     const std::string& name, const json& j) {
    return emit_file(bundle, dir, name, j.dump(2) + "\n");
}

json finalize_bundle(ResultBundle& bundle, const std::string& dir) {
    if (!dir.empty()) emit_json(bundle, dir, "summary.json", bundle.summary);
    json files = json::array();
    for (const auto& f : bundle.files)
        files.push_back({{"name", f.name}, {"sha256", f.sha256}, {"bytes", f.bytes}});
    const json manifest = {
        {"scenario", bundle.scenario},
        {"params", bundle.params},
        {"versions",
         {{"library", "1.0.0"},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                        std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)}}},
        {"wall_time_s", bundle.wall_time_s},
        {"files", files},
    };
    if (!dir.empty())
        write_text_file(dir + "/manifest.json", manifest.dump(2) + "\n");
    return manifest;
}

}  // namespace tpqr::io
