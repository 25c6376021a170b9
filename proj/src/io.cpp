#include "liouvlab/io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace liouvlab::io {

namespace fs = std::filesystem;

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

namespace {

std::string hex64(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "0x%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t parse_hex64(const std::string& s) {
  std::size_t pos = 0;
  const auto v = std::stoull(s, &pos, 16);
  if (pos != s.size()) throw ModelError("bad model_hash '" + s + "'");
  return v;
}

static_assert(std::endian::native == std::endian::little, "binary records assume a little-endian host");

void put_u64(std::ostream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); }

std::uint64_t get_u64(std::istream& in) {
  std::uint64_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw ModelError("truncated field record");
  return v;
}

}  // namespace

json field_to_json(const Field& u) {
  json coeffs = json::array();
  for (const auto& c : u.coeffs) {
    coeffs.push_back(c.real());
    coeffs.push_back(c.imag());
  }
  return json{{"model_hash", hex64(u.model->hash())}, {"coeffs", std::move(coeffs)}};
}

Field field_from_json(const json& j, const ModelPtr& model) {
  if (parse_hex64(j.at("model_hash").get<std::string>()) != model->hash()) {
    throw ModelError("field belongs to a different model");
  }
  const auto& c = j.at("coeffs");
  if (c.size() != 2 * model->size()) throw ModelError("field has the wrong number of coefficients");
  Field u(model);
  for (std::size_t k = 0; k < model->size(); ++k) u.coeffs[k] = {c[2 * k].get<double>(), c[2 * k + 1].get<double>()};
  return u;
}

void write_field_binary(std::ostream& out, const Field& u) {
  put_u64(out, u.model->hash());
  put_u64(out, u.size());
  out.write(reinterpret_cast<const char*>(u.coeffs.data()),
            static_cast<std::streamsize>(u.coeffs.size() * sizeof(cplx)));
}

Field read_field_binary(std::istream& in, const ModelPtr& model) {
  if (get_u64(in) != model->hash()) throw ModelError("field belongs to a different model");
  if (get_u64(in) != model->size()) throw ModelError("field has the wrong number of coefficients");
  Field u(model);
  if (!in.read(reinterpret_cast<char*>(u.coeffs.data()), static_cast<std::streamsize>(u.size() * sizeof(cplx)))) {
    throw ModelError("truncated field record");
  }
  return u;
}

json model_to_json(const SpectralModel& model) {
  return json{{"d", model.dimension()},
              {"N", model.cutoff()},
              {"s", model.sobolev_s()},
              {"kind", to_string(model.kind())},
              {"M", model.size()},
              {"model_hash", hex64(model.hash())}};
}

ModelPtr model_from_json(const json& j) {
  auto model = build_model(j.at("d").get<int>(), j.at("N").get<int>(), j.at("s").get<double>(),
                           operator_kind_from_string(j.at("kind").get<std::string>()));
  if (j.contains("model_hash") && parse_hex64(j["model_hash"].get<std::string>()) != model->hash()) {
    throw ModelError("model_hash does not match (d, N, s, kind)");
  }
  return model;
}

void write_ensemble(const fs::path& dir, const Ensemble& e) {
  e.validate();
  fs::create_directories(dir);
  json manifest{{"model", model_to_json(*e.model)}, {"label", e.label}, {"seed", e.seed}, {"count", e.size()}};
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  std::ofstream bin(dir / "samples.bin", std::ios::binary);
  for (const auto& u : e.samples) write_field_binary(bin, u);
  if (!bin) throw std::runtime_error("cannot write " + (dir / "samples.bin").string());
  std::string csv = "index,weight\n";
  for (std::size_t i = 0; i < e.size(); ++i) csv += std::to_string(i) + "," + format_double(e.weights[i]) + "\n";
  write_text(dir / "weights.csv", csv);
}

Ensemble read_ensemble(const fs::path& dir) {
  const auto manifest = json::parse(read_text(dir / "manifest.json"));
  Ensemble e;
  e.model = model_from_json(manifest.at("model"));
  e.label = manifest.value("label", "");
  e.seed = manifest.value("seed", std::uint64_t{0});
  const auto count = manifest.at("count").get<std::size_t>();
  std::ifstream bin(dir / "samples.bin", std::ios::binary);
  if (!bin) throw std::runtime_error("cannot read " + (dir / "samples.bin").string());
  for (std::size_t i = 0; i < count; ++i) e.samples.push_back(read_field_binary(bin, e.model));
  std::istringstream csv(read_text(dir / "weights.csv"));
  std::string line;
  std::getline(csv, line);
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    e.weights.push_back(std::stod(line.substr(line.find(',') + 1)));
  }
  e.validate();
  return e;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
  const std::size_t m = traj.states.empty() ? 0 : traj.states.front().size();
  out << "t";
  for (std::size_t k = 0; k < m; ++k) out << ",re_" << k << ",im_" << k;
  for (const auto& name : traj.invariant_names) out << "," << name;
  out << "\n";
  for (std::size_t j = 0; j < traj.times.size(); ++j) {
    out << format_double(traj.times[j]);
    for (const auto& c : traj.states[j].coeffs) out << "," << format_double(c.real()) << "," << format_double(c.imag());
    if (j < traj.invariants.size()) {
      for (double x : traj.invariants[j]) out << "," << format_double(x);
    }
    out << "\n";
  }
}

void write_trajectory_csv(std::ostream& out, const OdeTrajectory& traj, const std::vector<std::string>& labels) {
  const std::size_t m = traj.states.empty() ? 0 : traj.states.front().size();
  out << "t";
  for (std::size_t k = 0; k < m; ++k) out << "," << (k < labels.size() ? labels[k] : "x_" + std::to_string(k));
  for (const auto& name : traj.invariant_names) out << "," << name;
  out << "\n";
  for (std::size_t j = 0; j < traj.times.size(); ++j) {
    out << format_double(traj.times[j]);
    for (double x : traj.states[j]) out << "," << format_double(x);
    if (j < traj.invariants.size()) {
      for (double x : traj.invariants[j]) out << "," << format_double(x);
    }
    out << "\n";
  }
}

json residual_to_json(const ResidualRecord& r) {
  return json{{"experiment", r.experiment}, {"estimator", r.estimator},  {"t", r.t},
              {"dt_fd", r.dt_fd},           {"F_descriptor", r.descriptor}, {"lhs", r.lhs},
              {"rhs", r.rhs},               {"residual", r.residual},    {"se_lhs", r.se_lhs},
              {"se_rhs", r.se_rhs},         {"se_paired", r.se_paired},  {"z", r.z},
              {"excluded_mass", r.excluded_mass}};
}

namespace {

std::string csv_cell(const json& v) {
  if (v.is_null()) return "";
  if (v.is_number_float()) return format_double(v.get<double>());
  if (v.is_number()) return v.dump();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  std::string s = v.is_string() ? v.get<std::string>() : v.dump();
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

}  // namespace

std::string records_to_csv(const std::vector<json>& records) {
  std::vector<std::string> columns;
  for (const auto& r : records) {
    for (const auto& [key, _] : r.items()) {
      if (std::find(columns.begin(), columns.end(), key) == columns.end()) columns.push_back(key);
    }
  }
  std::string out;
  for (std::size_t c = 0; c < columns.size(); ++c) out += (c ? "," : "") + columns[c];
  out += "\n";
  for (const auto& r : records) {
    for (std::size_t c = 0; c < columns.size(); ++c) {
      if (c) out += ",";
      if (r.contains(columns[c])) out += csv_cell(r[columns[c]]);
    }
    out += "\n";
  }
  return out;
}

std::string git_blob_sha1(std::string_view bytes) {
  const std::string header = "blob " + std::to_string(bytes.size()) + std::string(1, '\0');
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  const bool ok = ctx && EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) &&
                  EVP_DigestUpdate(ctx, header.data(), header.size()) &&
                  EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) && EVP_DigestFinal_ex(ctx, digest, &length);
  EVP_MD_CTX_free(ctx);
  if (!ok) throw std::runtime_error("SHA-1 digest failed");
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < length; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

}  // namespace liouvlab::io
